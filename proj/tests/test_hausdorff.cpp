#include <cmath>
#include <cstdint>
#include <vector>

#include "carnot/hausdorff.hpp"
#include "carnot/rng.hpp"
#include "doctest.h"

using namespace carnot;

namespace {

const double kCantorDim = std::log(2.0) / std::log(3.0);

Point h1_point(double x, double y, double z) {
  Eigen::VectorXd x1(2), x2(1);
  x1 << x, y;
  x2 << z;
  return Point(x1, x2);
}

IFSMap map_at(double x, double y, double ratio) {
  IFSMap m;
  m.p = h1_point(x, y, 0.0);
  m.ratio = ratio;
  return m;
}

// Two maps of ratio 1/3 along the first horizontal axis: the attractor is the
// middle-thirds Cantor set embedded in the x-axis.
IFSSystem cantor_pair() {
  IFSSystem sys;
  sys.maps = {map_at(0, 0, 1.0 / 3.0), map_at(2.0 / 3.0, 0, 1.0 / 3.0)};
  return sys;
}

IFSSystem corner_four(double ratio, double off) {
  IFSSystem sys;
  sys.maps = {map_at(0, 0, ratio), map_at(off, 0, ratio), map_at(0, off, ratio),
              map_at(off, off, ratio)};
  return sys;
}

std::vector<double> geometric_scales(double hi, double lo, int m) {
  std::vector<double> s(m);
  for (int i = 0; i < m; ++i)
    s[i] = hi * std::pow(lo / hi, static_cast<double>(i) / (m - 1));
  return s;
}

std::vector<double> ternary_scales(int k_lo, int k_hi) {
  std::vector<double> s;
  for (int k = k_lo; k <= k_hi; ++k) s.push_back(std::pow(3.0, -k));
  return s;
}

Eigen::MatrixXd segment_cloud(bool vertical, std::int64_t n) {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, n);
  for (std::int64_t i = 0; i < n; ++i)
    pts(vertical ? 2 : 0, i) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return pts;
}

EmpiricalMeasure uniform_on(Eigen::MatrixXd pts, double s) {
  EmpiricalMeasure nu;
  nu.weights = Eigen::VectorXd::Constant(pts.cols(), 1.0 / static_cast<double>(pts.cols()));
  nu.points = std::move(pts);
  nu.s = s;
  return nu;
}

RadonMeasure atomize(const GroupStructure& G, const EmpiricalMeasure& nu) {
  return to_radon(G, nu);
}

}  // namespace

TEST_CASE("box-count slopes recover the metric dimension of the model segments") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  const std::int64_t n = 200000;
  auto scales = geometric_scales(0.5, 1.5e-4, 14);

  CoverReport ch = box_count(d, segment_cloud(false, n), scales);
  CHECK(std::abs(ch.slope - 1.0) < 0.1);
  CHECK(ch.ci < 0.05);
  CHECK(ch.n_points == n);
  CHECK(ch.kappa >= 1.0);
  CHECK(ch.kappa < 3.5);
  CHECK(ch.diameter > 0.9);
  CHECK(ch.diameter < 1.3);
  CHECK(ch.span_decades > 2.5);

  // The same parameter interval traversed vertically is a 2-dimensional set:
  // the whole segment sits in one first-layer column and only the r^2 fibers
  // resolve it.
  CoverReport cv = box_count(d, segment_cloud(true, n), scales);
  CHECK(std::abs(cv.slope - 2.0) < 0.1);
  // At the finest scale 1/r^2 boxes would exceed the saturation cap, so the
  // count there must be flagged and excluded from the fit.
  CHECK(cv.saturated.back() == 1);
  CHECK(cv.counts.back() > n / 20);
  CHECK(cv.in_fit.back() == 0);
  CHECK(cv.in_fit.front() == 0);  // coarse scales are boundary-dominated
}

TEST_CASE("streaming and in-memory counts agree and are thread invariant") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  const std::int64_t n = 50000;
  Eigen::MatrixXd pts = ifs_attractor(G, cantor_pair(), n, 11);
  auto scales = ternary_scales(2, 12);

  CoverReport a = box_count(d, pts, scales);
  CoverReport b = box_count_stream(
      d, n, [&](std::int64_t i, Eigen::VectorXd& out) { out = pts.col(i); }, scales);
  CHECK(a.counts == b.counts);
  CHECK(a.slope == b.slope);
  CHECK(a.kappa == b.kappa);

  CoverReport c1 = box_count(d, pts, scales, 1);
  CoverReport c5 = box_count(d, pts, scales, 5);
  CHECK(c1.counts == c5.counts);
  CHECK(c1.slope == c5.slope);
  CHECK(c1.ci == c5.ci);
}

TEST_CASE("box counting rejects underspecified experiments") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  Eigen::MatrixXd seg = segment_cloud(false, 10000);
  auto ok = geometric_scales(0.5, 1.5e-4, 14);

  CHECK_THROWS_AS(box_count(d, segment_cloud(false, 5000), ok), DomainError);
  CHECK_THROWS_AS(box_count(d, seg, {0.5, 0.1, 0.001}, 1), DomainError);
  CHECK_THROWS_AS(box_count(d, seg, {0.5, 0.2, 0.05, 0.01}, 1), DomainError);
  CHECK_THROWS_AS(box_count(d, seg, {0.5, 0.1, -0.01, 0.001}, 1), DomainError);
  // Enough scales and span, but only one lands inside the trusted window.
  CHECK_THROWS_AS(box_count(d, seg, {3.2, 1.6, 0.8, 0.4, 0.009}, 1), DomainError);
  CHECK_THROWS_AS(box_count(d, Eigen::MatrixXd::Zero(2, 20000), ok), StructuralError);
}

TEST_CASE("the middle-thirds attractor has the Cantor dimension, invariantly") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  IFSSystem sys = cantor_pair();
  CHECK(moran_dimension(sys) == doctest::Approx(kCantorDim).epsilon(1e-9));

  const std::int64_t n = 200000;
  Eigen::MatrixXd att = ifs_attractor(G, sys, n, 11);
  REQUIRE(att.rows() == 3);
  REQUIRE(att.cols() == n);
  // Both translations are horizontal along the same axis, so the orbit never
  // leaves it: y and the bracket coordinate stay exactly zero.
  CHECK(att.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(att.row(2).cwiseAbs().maxCoeff() == 0.0);

  auto scales = ternary_scales(2, 13);
  CoverReport base = box_count(d, att, scales);
  CHECK(std::abs(base.slope - kCantorDim) < 0.05);
  CHECK(base.ci < 0.05);

  // Left translation is a gauge isometry; dilation rescales all distances.
  // Neither may move the slope beyond fit noise.
  Point g = h1_point(0.7, -0.4, 0.3);
  Eigen::MatrixXd moved(3, n), shrunk(3, n);
  for (std::int64_t i = 0; i < n; ++i) {
    Point p = point_from_ambient(G, att.col(i));
    moved.col(i) = compose(G, g, p).ambient();
    shrunk.col(i) = dilate(G, 0.5, p).ambient();
  }
  CoverReport mv = box_count(d, moved, scales);
  CoverReport sh = box_count(d, shrunk, scales);
  CHECK(std::abs(mv.slope - base.slope) < 0.04);
  CHECK(std::abs(sh.slope - base.slope) < 0.05);
}

TEST_CASE("four-corner systems: Moran exponents and the full-square lift") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);

  CHECK(moran_dimension(corner_four(0.5, 0.5)) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(moran_dimension(corner_four(1.0 / 3.0, 2.0 / 3.0)) ==
        doctest::Approx(2.0 * kCantorDim).epsilon(1e-9));
  IFSSystem lone;
  lone.maps = {map_at(0.3, 0.1, 0.5)};
  CHECK(moran_dimension(lone) == 0.0);

  // Ratio 1/2 with offset 1/2 tiles the unit square: the attractor is its
  // horizontal lift, a 2-dimensional graph whose fibers the sheared boxes
  // absorb into O(r^2) columns.
  Eigen::MatrixXd att = ifs_attractor(G, corner_four(0.5, 0.5), 1000000, 7);
  // Coarse tail carries the span; the geometric cluster sits inside the
  // window between the boundary trim (~diameter/40) and the saturation cap,
  // with a ratio incommensurate with the dyadic cell lattice (aligned scales
  // produce resonant count dips).
  std::vector<double> scales = {1.6, 0.8, 0.4, 0.2, 0.1};
  for (double r = 0.045; r > 0.01; r *= 0.839) scales.push_back(r);
  scales.push_back(0.0045);
  CoverReport c = box_count(d, att, scales);
  CHECK(std::abs(c.slope - 2.0) < 0.1);
}

TEST_CASE("chaos game determinism and degenerate systems") {
  auto G = make_heisenberg(1);
  IFSSystem lone;
  lone.maps = {map_at(0, 0, 0.5)};
  Eigen::MatrixXd fixed = ifs_attractor(G, lone, 2000, 3);
  CHECK(fixed.cwiseAbs().maxCoeff() == 0.0);  // orbit collapses to the fixed point

  IFSSystem sys = cantor_pair();
  Eigen::MatrixXd a = ifs_attractor(G, sys, 4000, 19);
  Eigen::MatrixXd b = ifs_attractor(G, sys, 4000, 19);
  Eigen::MatrixXd c = ifs_attractor(G, sys, 4000, 20);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);

  IFSSystem bad = cantor_pair();
  bad.maps[0].ratio = 1.0;
  CHECK_THROWS_AS(ifs_attractor(G, bad, 100, 1), DomainError);
  bad.maps[0].ratio = 0.0;
  CHECK_THROWS_AS(ifs_attractor(G, bad, 100, 1), DomainError);
  CHECK_THROWS_AS(ifs_attractor(G, IFSSystem{}, 100, 1), DomainError);
  CHECK_THROWS_AS(ifs_attractor(G, sys, 0, 1), DomainError);
  CHECK_THROWS_AS(moran_dimension(IFSSystem{}), DomainError);
}

TEST_CASE("separation report distinguishes touching from separated systems") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);

  // Middle thirds: the two first-level images span [0,1/3] and [2/3,1], so
  // the gap equals the image diameter and the conservative margin fails.
  SeparationReport touch = ifs_separation(d, cantor_pair());
  CHECK(touch.min_gap == doctest::Approx(1.0 / 3.0).epsilon(0.08));
  CHECK(touch.max_image_diameter == doctest::Approx(1.0 / 3.0).epsilon(0.12));
  CHECK(!touch.well_separated);

  IFSSystem wide;
  wide.maps = {map_at(0, 0, 0.2), map_at(0.8, 0, 0.2)};
  SeparationReport ok = ifs_separation(d, wide);
  CHECK(ok.min_gap == doctest::Approx(0.6).epsilon(0.08));
  CHECK(ok.well_separated);

  CHECK_THROWS_AS(ifs_separation(d, wide, 8), DomainError);
}

TEST_CASE("regularity scan: flat profile at the true exponent, growth above it") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  std::vector<double> radii = {0.25, 0.125, 0.0625, 0.03125};

  EmpiricalMeasure nu = uniform_on(segment_cloud(false, 4096), 1.0);
  RegularityReport flat = regularity_check(d, nu, 64, radii, 5);
  CHECK(flat.n_centers == 64);
  CHECK(flat.radii.size() == radii.size());
  CHECK(flat.b_hat >= 0.9);
  CHECK(flat.b_hat <= 3.0);
  CHECK(std::abs(flat.trend) < 0.2);
  CHECK(flat.violations == 0);

  // Stability under sampling density: quadrupling the cloud must not move
  // the bound by more than a factor of 2.
  EmpiricalMeasure nu4 = uniform_on(segment_cloud(false, 16384), 1.0);
  RegularityReport flat4 = regularity_check(d, nu4, 64, radii, 5);
  CHECK(flat4.b_hat <= 2.0 * flat.b_hat);
  CHECK(2.0 * flat4.b_hat >= flat.b_hat);

  // Same measure scanned at s = 1.5: the ratio grows like r^{-1/2}.
  EmpiricalMeasure hot = uniform_on(segment_cloud(false, 4096), 1.5);
  RegularityReport steep = regularity_check(d, hot, 64, radii, 5);
  CHECK(steep.trend > 0.3);
  CHECK(steep.violations >= 1);

  // A single atom is the extreme failure: the ratio is w / r^s at every
  // radius, so the profile grows without bound.
  EmpiricalMeasure atom;
  atom.points = h1_point(0.3, 0.1, 0.05).ambient();
  atom.weights = Eigen::VectorXd::Constant(1, 2.0);
  atom.s = 1.0;
  RegularityReport spike = regularity_check(d, atom, 8, {0.5, 0.25, 0.125, 0.0625}, 5);
  CHECK(spike.b_hat == doctest::Approx(2.0 / 0.0625).epsilon(1e-12));
  CHECK(spike.trend == doctest::Approx(1.0).epsilon(0.05));
  CHECK(spike.violations >= 1);

  CHECK_THROWS_AS(regularity_check(d, uniform_on(segment_cloud(false, 4096), 0.0), 8, radii, 5),
                  DomainError);
  CHECK_THROWS_AS(regularity_check(d, nu, 0, radii, 5), DomainError);
  CHECK_THROWS_AS(regularity_check(d, nu, 8, {}, 5), DomainError);
  CHECK_THROWS_AS(regularity_check(d, nu, 8, {1.5, 0.5}, 5), DomainError);
  EmpiricalMeasure hollow = nu;
  hollow.weights.setZero();
  CHECK_THROWS_AS(regularity_check(d, hollow, 8, radii, 5), DomainError);
}

TEST_CASE("phi functional: mass limit, blow-up on atoms, stable off them") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  const std::int64_t n = 65536;
  Eigen::MatrixXd att = ifs_attractor(G, cantor_pair(), n, 3);
  EmpiricalMeasure nu = uniform_on(att, kCantorDim);
  EmpiricalMeasure nu_half = uniform_on(att.leftCols(n / 2), kCantorDim);

  Point far = h1_point(5, 5, 5);
  CHECK(phi_functional(d, nu, 0.0, far) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(phi_functional(d, nu, nu.s, far), DomainError);
  CHECK_THROWS_AS(phi_functional(d, nu, -0.1, far), DomainError);
  EmpiricalMeasure unscaled = nu;
  unscaled.s = 0.0;
  CHECK_THROWS_AS(phi_functional(d, unscaled, 0.0, far), DomainError);

  Point on_atom = point_from_ambient(G, att.col(17));
  CHECK(std::isinf(phi_functional(d, nu, 0.3, on_atom)));

  // Boundedness and refinement stability on a probe line above the set.
  const double t = 0.4;
  double worst_drift = 0.0, largest = 0.0;
  for (int i = 0; i < 12; ++i) {
    Point y = h1_point(-0.2 + 1.4 * i / 11.0, 0.04, 0.01);
    double full = phi_functional(d, nu, t, y);
    double half = phi_functional(d, nu_half, t, y);
    REQUIRE(std::isfinite(full));
    largest = std::max(largest, full);
    worst_drift = std::max(worst_drift, std::abs(full - half) / full);
  }
  CHECK(largest < 100.0);
  CHECK(worst_drift <= 0.10);

  // Continuity toward a set point that carries no sample atom: 1/4 lies in
  // the middle-thirds set. The tail oscillation along the approach is
  // bounded by the refinement error of the estimator itself.
  const double tc = 0.25;
  Point y0 = h1_point(0.25, 0, 0);
  double phi0 = phi_functional(d, nu, tc, y0);
  REQUIRE(std::isfinite(phi0));
  double refine = std::abs(phi0 - phi_functional(d, nu_half, tc, y0));
  double osc = 0.0;
  for (int k : {4, 6, 8, 10, 12}) {
    Point yk = h1_point(0.25 + std::pow(3.0, -k), 0, 0);
    double fk = phi_functional(d, nu, tc, yk);
    REQUIRE(std::isfinite(fk));
    refine = std::max(refine, std::abs(fk - phi_functional(d, nu_half, tc, yk)));
    if (k >= 10) osc = std::max(osc, std::abs(fk - phi0));
  }
  CHECK(osc <= 3.0 * refine + 0.01 * phi0);
}

TEST_CASE("threshold experiment: divergence below, finite witness above") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  MeasureBuilder builder = atomize;

  SUBCASE("a point mass diverges along every ray at unit rate") {
    ThresholdParams prm;
    prm.n_points = 16384;
    prm.scales = {1.0, 0.3, 0.1, 0.03, 0.003};
    std::vector<HorizontalCurve> rays = {
        make_horizontal_ray(G, identity(G), (Eigen::VectorXd(2) << 1, 0).finished(), 0.5),
        make_horizontal_ray(G, identity(G), (Eigen::VectorXd(2) << 0, 1).finished(), 0.5)};
    ThresholdReport rep = threshold_experiment(d, IFSSystem{}, 0.0, builder, rays, prm);
    CHECK(rep.threshold == 1.0);
    CHECK(rep.moran_dim == 0.0);
    CHECK(rep.measured_dim == 0.0);
    CHECK(!rep.above_threshold);
    CHECK(rep.n_divergent == 2);
    for (const CurveDiagnostic& diag : rep.curves) {
      CHECK(diag.divergent);
      CHECK(diag.fitted_exponent == doctest::Approx(1.0).epsilon(0.02));
    }
    CHECK(rep.finiteness_estimate == 0.0);
    CHECK(!rep.finite_witness);
  }

  SUBCASE("below threshold the probe rays blow up off the Cantor axis") {
    IFSSystem sys = cantor_pair();
    ThresholdParams prm;
    prm.n_points = 32768;
    prm.scales = ternary_scales(2, 12);
    Eigen::MatrixXd heads = ifs_attractor(G, sys, 600, prm.seed);
    Eigen::VectorXd up(2);
    up << 0, 1;
    std::vector<HorizontalCurve> rays = {
        make_horizontal_ray(G, point_from_ambient(G, heads.col(100)), up, 0.4),
        make_horizontal_ray(G, point_from_ambient(G, heads.col(500)), up, 0.4)};
    ThresholdReport rep = threshold_experiment(d, sys, kCantorDim, builder, rays, prm);
    CHECK(std::abs(rep.measured_dim - kCantorDim) < 0.05);
    CHECK(rep.moran_dim == doctest::Approx(kCantorDim).epsilon(1e-9));
    CHECK(!rep.above_threshold);
    CHECK(rep.n_divergent == 2);
    for (const CurveDiagnostic& diag : rep.curves) CHECK(diag.fitted_exponent > 0.2);
    CHECK(!rep.finite_witness);
  }

  SUBCASE("above threshold the integrals settle and the energy is certified") {
    IFSSystem sys = corner_four(1.0 / 3.0, 2.0 / 3.0);
    ThresholdParams prm;
    prm.n_points = 65536;
    prm.scales = ternary_scales(0, 8);
    prm.t_mins = {8e-3, 4e-3, 2e-3, 1e-3, 5e-4};
    prm.quad_tol = 1e-5;
    Eigen::MatrixXd heads = ifs_attractor(G, sys, 600, prm.seed);
    Eigen::VectorXd up(2);
    up << 0, 1;
    std::vector<HorizontalCurve> rays = {
        make_horizontal_ray(G, point_from_ambient(G, heads.col(100)), up, 1.0),
        make_horizontal_ray(G, point_from_ambient(G, heads.col(500)), up, 1.0)};
    ThresholdReport rep =
        threshold_experiment(d, sys, 2.0 * kCantorDim, builder, rays, prm);
    CHECK(std::abs(rep.measured_dim - 2.0 * kCantorDim) < 0.1);
    CHECK(rep.above_threshold);
    CHECK(rep.n_divergent == 0);
    for (const CurveDiagnostic& diag : rep.curves) {
      CHECK(diag.fitted_exponent < 0.1);
      CHECK(diag.last_growth < 0.05);
    }
    CHECK(std::isfinite(rep.finiteness_estimate));
    CHECK(rep.finiteness_estimate > 0.0);
    CHECK(rep.finiteness_drift <= 0.05);
    CHECK(rep.finiteness_converged);
    CHECK(rep.giraud_ratio > 0.0);
    CHECK(std::isfinite(rep.certified_bound));
    CHECK(rep.certified_bound >= rep.finiteness_estimate);
    CHECK(rep.finite_witness);
  }

  SUBCASE("gates: certification, target agreement, and parameter hygiene") {
    IFSSystem sys = cantor_pair();
    ThresholdParams prm;
    prm.n_points = 16384;
    prm.scales = ternary_scales(2, 12);
    Eigen::VectorXd up(2);
    up << 0, 1;
    std::vector<HorizontalCurve> rays = {make_horizontal_ray(
        G, point_from_ambient(G, ifs_attractor(G, sys, 10, prm.seed).col(3)), up, 0.4)};

    // The axis-aligned middle-thirds counts are exactly 2^k, so their fit is
    // exactly linear with ci exactly zero; a ratio incommensurate with the
    // ternary boxes has genuine straddling noise for the gate to reject.
    IFSSystem offgrid;
    offgrid.maps = {map_at(0, 0, 0.3), map_at(0.7, 0, 0.3)};
    const double offgrid_dim = std::log(2.0) / std::log(10.0 / 3.0);
    ThresholdParams strict = prm;
    strict.n_points = 32768;
    strict.dim_ci_max = 1e-6;
    CHECK_THROWS_WITH_AS(
        threshold_experiment(d, offgrid, offgrid_dim, builder, rays, strict),
        "threshold_experiment: dimension estimate not certified, ci too wide", DomainError);
    CHECK_THROWS_WITH_AS(threshold_experiment(d, sys, 0.2, builder, rays, prm),
                         "threshold_experiment: measured dimension disagrees with the target",
                         DomainError);

    ThresholdParams lame = prm;
    lame.t_mins = {0.5};
    CHECK_THROWS_AS(threshold_experiment(d, sys, kCantorDim, builder, rays, lame), DomainError);

    std::vector<HorizontalCurve> stubby = {make_horizontal_ray(G, identity(G), up, 0.05)};
    CHECK_THROWS_AS(threshold_experiment(d, sys, kCantorDim, builder, stubby, prm), DomainError);

    CHECK_THROWS_AS(threshold_experiment(d, sys, kCantorDim, MeasureBuilder{}, rays, prm),
                    StructuralError);
    CHECK_THROWS_AS(threshold_experiment(d, sys, kCantorDim, builder, {}, prm), DomainError);
  }
}
