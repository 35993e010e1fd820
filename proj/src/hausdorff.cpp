#include "carnot/hausdorff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <vector>

#include "carnot/fit.hpp"
#include "carnot/parallel.hpp"
#include "carnot/rng.hpp"

namespace carnot {

namespace {

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t fold(uint64_t h, int64_t v) {
  return mix64(h ^ (static_cast<uint64_t>(v) * 0xd1342543de82ef95ull + 0x9e3779b97f4a7c15ull));
}

// Gauge distance from a fixed center, allocation-free in the hot loop: the
// left difference needs only x - c and the bracket of c1 against x1, and the
// latter contracts against precomputed J_k c1 rows.
struct CenteredGauge {
  const GaugeFn* d = nullptr;
  Point c;
  std::vector<Eigen::VectorXd> jc;  // J_k c1
  mutable Point buf;

  CenteredGauge(const GaugeFn& dd, const Point& center) : d(&dd), c(center) {
    const GroupStructure& G = dd.group;
    jc.reserve(G.n2());
    for (int k = 0; k < G.n2(); ++k) jc.push_back(G.jmaps[k] * c.first);
    buf = identity(G);
  }

  template <class Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    const GroupStructure& G = d->group;
    const int n1 = G.n1(), n2 = G.n2();
    buf.first = x.head(n1) - c.first;
    for (int k = 0; k < n2; ++k)
      buf.second[k] = x[n1 + k] - c.second[k] - 0.5 * jc[static_cast<size_t>(k)].dot(x.head(n1));
    return gauge(*d, buf);
  }
};

struct ScaleCount {
  std::int64_t count = 0;
  bool saturated = false;
};

ScaleCount count_scale(const GaugeFn& d, std::int64_t n, const PointFiller& at, double r,
                       std::int64_t cap) {
  const GroupStructure& G = d.group;
  const int n1 = G.n1(), n2 = G.n2();
  const double r2 = r * r;
  Eigen::VectorXd x(G.dim());
  std::vector<std::int64_t> idx(static_cast<size_t>(n1));
  std::unordered_set<uint64_t> seen;
  seen.reserve(4096);
  for (std::int64_t i = 0; i < n; ++i) {
    at(i, x);
    uint64_t h = 0x243f6a8885a308d3ull;
    for (int j = 0; j < n1; ++j) {
      idx[static_cast<size_t>(j)] = static_cast<std::int64_t>(std::floor(x[j] / r));
      h = fold(h, idx[static_cast<size_t>(j)]);
    }
    for (int k = 0; k < n2; ++k) {
      // B_k(c1, x1) with c1 = (idx + 1/2) r the column center
      const auto& J = G.jmaps[k];
      double acc = 0;
      for (int a = 0; a < n1; ++a) {
        double ja = 0;
        for (int b = 0; b < n1; ++b)
          ja += J(a, b) * (static_cast<double>(idx[static_cast<size_t>(b)]) + 0.5);
        acc += ja * r * x[a];
      }
      h = fold(h, static_cast<std::int64_t>(std::floor((x[n1 + k] - 0.5 * acc) / r2)));
    }
    seen.insert(h);
    if (static_cast<std::int64_t>(seen.size()) > cap)
      return {static_cast<std::int64_t>(seen.size()), true};
  }
  return {static_cast<std::int64_t>(seen.size()), false};
}

// Sampled gauge diameter of a unit-scale box: endpoints offset by alpha, beta
// within the column, fiber difference in [-1, 1]; the column anchor drops out
// of the group difference, so this one number serves every scale.
double measure_kappa(const GaugeFn& d) {
  const GroupStructure& G = d.group;
  const int n1 = G.n1(), n2 = G.n2();
  Eigen::VectorXd alpha(n1), beta(n1);
  Point p = identity(G);
  double worst = 0;
  for (int t = 0; t < 8192; ++t) {
    auto g = stream_at(0x6b0cUL, 0xceed, static_cast<uint64_t>(t));
    for (int j = 0; j < n1; ++j) alpha[j] = g.next_in(-0.5, 0.5);
    for (int j = 0; j < n1; ++j) beta[j] = g.next_in(-0.5, 0.5);
    p.first = beta - alpha;
    for (int k = 0; k < n2; ++k)
      p.second[k] = g.next_in(-1.0, 1.0) - 0.5 * (G.jmaps[k] * alpha).dot(beta);
    worst = std::max(worst, gauge(d, p));
  }
  return 1.1 * worst;  // sampled sup, padded
}

Eigen::VectorXd cloud_mean(int dim, std::int64_t n, const PointFiller& at, int threads) {
  const std::int64_t blocks = std::min<std::int64_t>(n, 1024);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, blocks);
  parallel_for(
      blocks,
      [&](std::int64_t b) {
        Eigen::VectorXd x(dim), s = Eigen::VectorXd::Zero(dim);
        const std::int64_t begin = b * n / blocks, end = (b + 1) * n / blocks;
        for (std::int64_t i = begin; i < end; ++i) {
          at(i, x);
          s += x;
        }
        acc.col(b) = s;
      },
      threads);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  for (std::int64_t b = 0; b < blocks; ++b) total += acc.col(b);
  return total / static_cast<double>(n);
}

double cloud_max_gauge(const GaugeFn& d, const Point& center, std::int64_t n,
                       const PointFiller& at, int threads) {
  const std::int64_t blocks = std::min<std::int64_t>(n, 1024);
  std::vector<double> mx(static_cast<size_t>(blocks), 0.0);
  parallel_for(
      blocks,
      [&](std::int64_t b) {
        CenteredGauge dist(d, center);
        Eigen::VectorXd x(d.group.dim());
        double m = 0;
        const std::int64_t begin = b * n / blocks, end = (b + 1) * n / blocks;
        for (std::int64_t i = begin; i < end; ++i) {
          at(i, x);
          m = std::max(m, dist(x));
        }
        mx[static_cast<size_t>(b)] = m;
      },
      threads);
  double m = 0;
  for (double v : mx) m = std::max(m, v);
  return m;
}

std::size_t weighted_index(const std::vector<double>& cum, double u) {
  auto it = std::upper_bound(cum.begin(), cum.end(), u * cum.back());
  if (it == cum.end()) --it;
  return static_cast<std::size_t>(it - cum.begin());
}

std::vector<double> cumulative(const Eigen::VectorXd& w) {
  std::vector<double> cum(static_cast<size_t>(w.size()));
  double acc = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    acc += w[i];
    cum[static_cast<size_t>(i)] = acc;
  }
  return cum;
}

}  // namespace

CoverReport box_count_stream(const GaugeFn& d, std::int64_t n, const PointFiller& at,
                             std::vector<double> scales, int threads) {
  const GroupStructure& G = d.group;
  if (n < 10000) throw DomainError("box_count: at least 1e4 sample points required");
  for (double r : scales)
    if (!std::isfinite(r) || !(r > 0)) throw DomainError("box_count: scales must be positive");
  std::sort(scales.begin(), scales.end(), std::greater<double>());
  scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
  if (scales.size() < 4) throw DomainError("box_count: at least 4 distinct scales required");
  const double span = std::log10(scales.front() / scales.back());
  if (span < 2.5) throw DomainError("box_count: scales must span at least 2.5 decades");

  CoverReport rep;
  rep.scales = scales;
  rep.n_points = n;
  rep.span_decades = span;
  rep.kappa = measure_kappa(d);

  const Point center = point_from_ambient(G, cloud_mean(G.dim(), n, at, threads));
  rep.diameter = 2.0 * cloud_max_gauge(d, center, n, at, threads);

  const std::int64_t cap = n / 20;
  const int ns = static_cast<int>(scales.size());
  rep.counts.assign(static_cast<size_t>(ns), 0);
  rep.saturated.assign(static_cast<size_t>(ns), 0);
  rep.in_fit.assign(static_cast<size_t>(ns), 0);
  parallel_for(
      ns,
      [&](std::int64_t si) {
        ScaleCount c = count_scale(d, n, at, scales[static_cast<size_t>(si)], cap);
        rep.counts[static_cast<size_t>(si)] = c.count;
        rep.saturated[static_cast<size_t>(si)] = c.saturated ? 1 : 0;
      },
      threads);

  if (rep.diameter == 0.0) return rep;  // a single point: every count is 1, slope 0

  std::vector<double> xs, ys;
  for (int i = 0; i < ns; ++i) {
    if (rep.saturated[static_cast<size_t>(i)] || rep.counts[static_cast<size_t>(i)] < 2) continue;
    if (scales[static_cast<size_t>(i)] > rep.diameter / 40.0) continue;
    rep.in_fit[static_cast<size_t>(i)] = 1;
    xs.push_back(std::log(1.0 / scales[static_cast<size_t>(i)]));
    ys.push_back(std::log(static_cast<double>(rep.counts[static_cast<size_t>(i)])));
  }
  if (xs.size() < 3)
    throw DomainError(
        "box_count: fewer than 3 scales in the fit window; widen the scale list or add samples");

  LineFit fit = fit_line(xs, ys);
  rep.slope = fit.slope;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    const double s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  // A distortion kappa can slide each scale by up to log(kappa) along the
  // abscissa; that moves the fit only where the local slopes disagree.
  rep.ci = fit.ci_halfwidth +
           (hi - lo) * std::log(std::max(rep.kappa, 1.0)) / (xs.back() - xs.front());
  return rep;
}

CoverReport box_count(const GaugeFn& d, const Eigen::MatrixXd& points, std::vector<double> scales,
                      int threads) {
  if (points.rows() != d.group.dim())
    throw StructuralError("box_count: ambient dimension mismatch");
  auto at = [&points](std::int64_t i, Eigen::VectorXd& out) { out = points.col(i); };
  return box_count_stream(d, points.cols(), at, std::move(scales), threads);
}

double moran_dimension(const IFSSystem& sys) {
  if (sys.maps.empty()) throw DomainError("moran_dimension: the system has no maps");
  for (const IFSMap& m : sys.maps)
    if (!(m.ratio > 0) || !(m.ratio < 1))
      throw DomainError("moran_dimension: contraction ratios must lie in (0,1)");
  if (sys.maps.size() == 1) return 0.0;
  auto excess = [&](double s) {
    double t = 0;
    for (const IFSMap& m : sys.maps) t += std::pow(m.ratio, s);
    return t - 1.0;
  };
  double lo = 0, hi = 1;
  while (excess(hi) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd ifs_attractor(const GroupStructure& G, const IFSSystem& sys, std::int64_t n,
                              std::uint64_t seed) {
  if (sys.maps.empty()) throw DomainError("ifs_attractor: the system has no maps");
  if (n <= 0) throw DomainError("ifs_attractor: need a positive sample count");
  for (const IFSMap& m : sys.maps) {
    check_point(G, m.p, "ifs_attractor");
    if (!(m.ratio > 0) || !(m.ratio < 1))
      throw DomainError("ifs_attractor: contraction ratios must lie in (0,1)");
  }
  const int m = static_cast<int>(sys.maps.size());
  const std::int64_t burn = 1000;
  Point x = identity(G);
  Eigen::MatrixXd out(G.dim(), n);
  for (std::int64_t k = 0; k < burn + n; ++k) {
    auto g = stream_at(seed, 0x1f5a, static_cast<uint64_t>(k));
    const int i = std::min(m - 1, static_cast<int>(g.next_double() * m));
    x = compose(G, sys.maps[static_cast<size_t>(i)].p,
                dilate(G, sys.maps[static_cast<size_t>(i)].ratio, x));
    if (k >= burn) out.col(k - burn) = x.ambient();
  }
  return out;
}

SeparationReport ifs_separation(const GaugeFn& d, const IFSSystem& sys, int probe_points,
                                std::uint64_t seed) {
  const GroupStructure& G = d.group;
  if (probe_points < 16) throw DomainError("ifs_separation: need at least 16 probe points");
  Eigen::MatrixXd base = ifs_attractor(G, sys, probe_points, seed);
  const int m = static_cast<int>(sys.maps.size());
  const int n = probe_points;
  std::vector<Eigen::MatrixXd> image(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    image[static_cast<size_t>(i)].resize(G.dim(), n);
    for (int j = 0; j < n; ++j) {
      Point q = compose(G, sys.maps[static_cast<size_t>(i)].p,
                        dilate(G, sys.maps[static_cast<size_t>(i)].ratio,
                               point_from_ambient(G, base.col(j))));
      image[static_cast<size_t>(i)].col(j) = q.ambient();
    }
  }
  SeparationReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  if (m == 1) rep.min_gap = 0;
  for (int i = 0; i < m; ++i) {
    double diam = 0;
    for (int a = 0; a < n; ++a) {
      CenteredGauge dist(d, point_from_ambient(G, image[static_cast<size_t>(i)].col(a)));
      for (int b = a + 1; b < n; ++b)
        diam = std::max(diam, dist(image[static_cast<size_t>(i)].col(b)));
      for (int i2 = i + 1; i2 < m; ++i2)
        for (int b = 0; b < n; ++b)
          rep.min_gap = std::min(rep.min_gap, dist(image[static_cast<size_t>(i2)].col(b)));
    }
    rep.max_image_diameter = std::max(rep.max_image_diameter, diam);
  }
  rep.well_separated = rep.min_gap > 2.0 * rep.max_image_diameter;
  return rep;
}

RegularityReport regularity_check(const GaugeFn& d, const EmpiricalMeasure& nu, int n_centers,
                                  const std::vector<double>& radii, std::uint64_t seed,
                                  int threads) {
  const GroupStructure& G = d.group;
  validate_empirical(G, nu);
  if (!(nu.s > 0)) throw DomainError("regularity_check: the exponent s must be positive");
  if (n_centers <= 0) throw DomainError("regularity_check: need at least one center");
  if (radii.empty()) throw DomainError("regularity_check: need at least one radius");
  for (double r : radii)
    if (!(r > 0) || !(r <= 1))
      throw DomainError("regularity_check: radii must lie in (0, 1], the regularity window");
  const double total = nu.total_mass();
  if (!(total > 0)) throw DomainError("regularity_check: the measure has no mass");

  RegularityReport rep;
  rep.s = nu.s;
  rep.n_centers = n_centers;
  rep.radii = radii;
  std::sort(rep.radii.begin(), rep.radii.end(), std::greater<double>());
  rep.radii.erase(std::unique(rep.radii.begin(), rep.radii.end()), rep.radii.end());
  const int nr = static_cast<int>(rep.radii.size());
  const std::int64_t n = nu.points.cols();

  const std::vector<double> cum = cumulative(nu.weights);
  std::vector<int> center_idx(static_cast<size_t>(n_centers));
  for (int j = 0; j < n_centers; ++j) {
    auto g = stream_at(seed, 0x4e65, static_cast<uint64_t>(j));
    center_idx[static_cast<size_t>(j)] = static_cast<int>(weighted_index(cum, g.next_double()));
  }

  Eigen::MatrixXd ratio = Eigen::MatrixXd::Zero(nr, n_centers);
  parallel_for(
      n_centers,
      [&](std::int64_t j) {
        const Point y = point_from_ambient(
            G, nu.points.col(center_idx[static_cast<size_t>(j)]));
        CenteredGauge dist(d, y);
        std::vector<double> bucket(static_cast<size_t>(nr), 0.0);
        for (std::int64_t i = 0; i < n; ++i) {
          const double dd = dist(nu.points.col(i));
          int k = -1;  // largest index with radii[k] >= dd
          for (int r = nr - 1; r >= 0; --r)
            if (rep.radii[static_cast<size_t>(r)] >= dd) {
              k = r;
              break;
            }
          if (k >= 0) bucket[static_cast<size_t>(k)] += nu.weights[i];
        }
        double mass = 0;
        for (int r = nr - 1; r >= 0; --r) {
          mass += bucket[static_cast<size_t>(r)];
          ratio(r, j) = mass / std::pow(rep.radii[static_cast<size_t>(r)], nu.s);
        }
      },
      threads);

  rep.b_hat = ratio.maxCoeff();
  rep.radius_max_ratio.resize(static_cast<size_t>(nr));
  for (int r = 0; r < nr; ++r)
    rep.radius_max_ratio[static_cast<size_t>(r)] = ratio.row(r).maxCoeff();

  std::vector<double> xs, ys;
  for (int r = 0; r < nr; ++r)
    if (rep.radius_max_ratio[static_cast<size_t>(r)] > 0) {
      xs.push_back(std::log(1.0 / rep.radii[static_cast<size_t>(r)]));
      ys.push_back(std::log(rep.radius_max_ratio[static_cast<size_t>(r)]));
    }
  rep.trend = xs.size() >= 2 ? fit_line(xs, ys).slope : 0.0;
  const double base = rep.radius_max_ratio.front();
  for (int r = 0; r < nr; ++r) {
    const double v = rep.radius_max_ratio[static_cast<size_t>(r)];
    if ((base > 0 && v > 2.0 * base) || (base == 0 && v > 0)) ++rep.violations;
  }
  return rep;
}

double phi_functional(const GaugeFn& d, const EmpiricalMeasure& nu, double t, const Point& y,
                      int threads) {
  const GroupStructure& G = d.group;
  validate_empirical(G, nu);
  check_point(G, y, "phi_functional");
  if (!(nu.s > 0)) throw DomainError("phi_functional: the exponent s must be positive");
  if (!(t >= 0) || t >= nu.s)
    throw DomainError("phi_functional: the kernel exponent must satisfy 0 <= t < s");
  const std::int64_t n = nu.points.cols();
  const std::int64_t blocks = std::min<std::int64_t>(n, 4096);
  std::vector<double> partial(static_cast<size_t>(blocks), 0.0);
  parallel_for(
      blocks,
      [&](std::int64_t b) {
        CenteredGauge dist(d, y);
        const std::int64_t begin = b * n / blocks, end = (b + 1) * n / blocks;
        double acc = 0;
        for (std::int64_t i = begin; i < end; ++i) {
          const double dd = dist(nu.points.col(i));
          const double w = nu.weights[i];
          if (dd == 0.0) {
            if (t == 0.0)
              acc += w;
            else if (w > 0)
              acc = std::numeric_limits<double>::infinity();
          } else {
            acc += w * std::pow(dd, -t);
          }
        }
        partial[static_cast<size_t>(b)] = acc;
      },
      threads);
  double total_phi = 0;
  for (double v : partial) total_phi += v;
  return total_phi;
}

ThresholdReport threshold_experiment(const GaugeFn& d, const IFSSystem& sys, double target_dim,
                                     const MeasureBuilder& mu_builder,
                                     const std::vector<HorizontalCurve>& curves,
                                     const ThresholdParams& prm) {
  const GroupStructure& G = d.group;
  const double q = G.Q();
  if (!mu_builder) throw StructuralError("threshold_experiment: a measure builder is required");
  if (curves.empty()) throw DomainError("threshold_experiment: at least one probe curve");
  if (prm.t_mins.size() < 2)
    throw DomainError("threshold_experiment: at least two probe cutoffs");
  std::vector<double> t_mins = prm.t_mins;
  std::sort(t_mins.begin(), t_mins.end(), std::greater<double>());
  if (!(t_mins.back() > 0))
    throw DomainError("threshold_experiment: probe cutoffs must be positive");

  ThresholdReport rep;
  rep.threshold = 0.5 * (q - 2.0);
  rep.moran_dim = sys.maps.empty() ? 0.0 : moran_dimension(sys);
  rep.curves.reserve(curves.size());

  Eigen::MatrixXd pts;
  if (sys.maps.empty())
    pts = Eigen::MatrixXd::Zero(G.dim(), std::max<std::int64_t>(prm.n_points, 10000));
  else
    pts = ifs_attractor(G, sys, prm.n_points, prm.seed);

  CoverReport cover = box_count(d, pts, prm.scales, prm.threads);
  rep.measured_dim = cover.slope;
  rep.dim_ci = cover.ci;
  if (!(cover.ci <= prm.dim_ci_max))
    throw DomainError("threshold_experiment: dimension estimate not certified, ci too wide");
  if (std::abs(rep.measured_dim - target_dim) > 0.15 + cover.ci)
    throw DomainError("threshold_experiment: measured dimension disagrees with the target");
  rep.above_threshold = rep.measured_dim > rep.threshold;

  const std::int64_t n = pts.cols();
  EmpiricalMeasure nu;
  nu.points = pts;
  nu.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  nu.s = std::max(rep.measured_dim, 0.0);
  RadonMeasure mu = mu_builder(G, nu);
  validate_measure(G, mu);
  if (!(mu.total_mass() > 0)) throw DomainError("threshold_experiment: mu has no mass");

  const double exponent = 2.0 / (q - 2.0);
  for (const HorizontalCurve& c : curves)
    if (!(t_mins.front() < c.delta))
      throw DomainError("threshold_experiment: cutoffs must sit below the curve span");
  for (const HorizontalCurve& c : curves) {
    CurveDiagnostic diag;
    // A start sitting exactly on an atom would contribute w * t^{-(Q-2)},
    // an artifact of atomizing mu: the continuum kernel carries no point
    // mass at the curve's own foot. Drop that one atom, mirroring the
    // diagonal-dropped energy below.
    RadonMeasure mu_c = mu;
    const Eigen::VectorXd foot = curve_point(G, c, 0.0).ambient();
    for (auto it = mu_c.atoms.begin(); it != mu_c.atoms.end(); ++it)
      if ((it->first.ambient() - foot).lpNorm<Eigen::Infinity>() == 0.0) {
        mu_c.atoms.erase(it);
        break;
      }
    if (mu_c.atoms.empty()) mu_c = mu;
    // Suffix segments: partials[k] integrates from t_mins[k] to delta.
    double acc = 0;
    double upper = c.delta;
    for (double tm : t_mins) {
      HorizontalCurve seg = c;
      seg.delta = upper;
      acc += horizontal_curve_integrate(d, mu_c, seg, exponent, tm, prm.quad_tol);
      diag.partials.push_back(acc);
      upper = tm;
    }
    bool blown = false;
    for (double p : diag.partials)
      if (!std::isfinite(p)) blown = true;
    if (blown) {
      diag.fitted_exponent = std::numeric_limits<double>::infinity();
      diag.divergent = true;
    } else {
      const size_t m = diag.partials.size();
      diag.fitted_exponent = std::log(diag.partials[m - 1] / diag.partials[m - 2]) /
                             std::log(t_mins[m - 2] / t_mins[m - 1]);
      diag.last_growth = diag.partials[m - 1] / diag.partials[m - 2] - 1.0;
      diag.divergent = diag.fitted_exponent > 0.1;
    }
    rep.curves.push_back(diag);
    if (diag.divergent) ++rep.n_divergent;
  }

  if (!rep.above_threshold) return rep;

  // Finiteness witness: F = sum_y mu(y) phi_nu(y, t) with t halfway between
  // the threshold and the measured dimension, estimated by weighted y draws
  // with exact coincidences dropped (the continuum energy has no diagonal).
  if (mu.density)
    throw DomainError("threshold_experiment: the finiteness witness needs an atomic mu");
  const double eps = rep.measured_dim - rep.threshold;
  const double t = rep.threshold + 0.5 * eps;
  Eigen::VectorXd mu_w(static_cast<Eigen::Index>(mu.atoms.size()));
  for (size_t i = 0; i < mu.atoms.size(); ++i)
    mu_w[static_cast<Eigen::Index>(i)] = mu.atoms[i].second;
  const std::vector<double> cum = cumulative(mu_w);
  const int draws = prm.finiteness_y_draws;

  auto energy = [&](std::int64_t n_cloud) {
    const double w = 1.0 / static_cast<double>(n_cloud);
    std::vector<double> phi(static_cast<size_t>(draws), 0.0);
    parallel_for(
        draws,
        [&](std::int64_t j) {
          auto g = stream_at(prm.seed, 0x7d1f, static_cast<uint64_t>(j));
          const Point y = mu.atoms[weighted_index(cum, g.next_double())].first;
          CenteredGauge dist(d, y);
          double acc = 0;
          for (std::int64_t i = 0; i < n_cloud; ++i) {
            const double dd = dist(pts.col(i));
            if (dd > 0) acc += w * std::pow(dd, -t);
          }
          phi[static_cast<size_t>(j)] = acc;
        },
        prm.threads);
    double mean = 0;
    for (double v : phi) mean += v;
    return mu_w.sum() * mean / static_cast<double>(draws);
  };
  rep.finiteness_estimate = energy(n);
  rep.finiteness_half = energy(n / 2);
  rep.finiteness_drift = std::abs(rep.finiteness_estimate - rep.finiteness_half) /
                         std::abs(rep.finiteness_estimate);
  rep.finiteness_converged = rep.finiteness_drift <= 0.05;

  if (prm.certify_giraud) {
    // The reduction kernel behind the witness: exponents a = 2 and
    // b = threshold - eps/2, whose certified ratio bounds the curve-family
    // integral by ratio * F.
    InequalityCase c;
    c.gauge = d;
    c.a = 2.0;
    c.b = rep.threshold - 0.5 * eps;
    Eigen::VectorXd lo = pts.rowwise().minCoeff(), hi = pts.rowwise().maxCoeff();
    c.omega.base = identity(G);
    c.omega.lo.resize(G.dim());
    c.omega.hi.resize(G.dim());
    for (int ax = 0; ax < G.dim(); ++ax) {
      const double w = std::max(hi[ax] - lo[ax], 0.5);
      c.omega.lo[ax] = lo[ax] - 0.75 * w;
      c.omega.hi[ax] = hi[ax] + 0.75 * w;
    }
    c.y = point_from_ambient(G, pts.col(0));
    CenteredGauge dist(d, c.y);
    const double want = 0.25 * cover.diameter;
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 1; i < std::min<std::int64_t>(n, 4096); ++i) {
      const double dd = dist(pts.col(i));
      if (dd > 0 && std::abs(dd - want) < std::abs(best - want)) {
        best = dd;
        c.p = point_from_ambient(G, pts.col(i));
      }
    }
    if (!std::isfinite(best))
      throw DomainError("threshold_experiment: no separated sample pair for the kernel witness");
    KernelResult kr = kernel_integral_certified(c, prm.quad);
    rep.giraud_ratio = kr.value * std::pow(gauge_distance(d, c.y, c.p), q - c.a - c.b);
    rep.certified_bound = rep.giraud_ratio * rep.finiteness_estimate;
  }
  rep.finite_witness = std::isfinite(rep.finiteness_estimate) && rep.finiteness_converged;
  return rep;
}

}  // namespace carnot
