#include <cmath>
#include <vector>

#include "carnot/polarflow.hpp"
#include "carnot/rng.hpp"
#include "doctest.h"

using namespace carnot;

namespace {

constexpr double kPi = 3.14159265358979323846;

Point random_seed_point(const GroupStructure& G, SplitMix64& rng) {
  Eigen::VectorXd x1(G.n1()), x2(G.n2());
  for (int i = 0; i < G.n1(); ++i) x1[i] = rng.next_in(-1.5, 1.5);
  for (int k = 0; k < G.n2(); ++k) x2[k] = rng.next_in(-1.5, 1.5);
  return Point(x1, x2);
}

double ambient_gap(const Point& a, const Point& b) {
  return (a.ambient() - b.ambient()).lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("flow scales the gauge exactly and composes as a semigroup") {
  for (int fam = 0; fam < 2; ++fam) {
    auto G = fam == 0 ? make_heisenberg(1) : make_quaternionic(1);
    auto d = make_gauge(G);
    SplitMix64 rng = stream_at(42, 0xf10a, fam);
    for (int trial = 0; trial < 12; ++trial) {
      Point g = random_seed_point(G, rng);
      if (in_characteristic_band(d, g, 1e-3)) continue;
      double dg = gauge(d, g);
      for (double s : {0.3, 2.5}) {
        FlowState st = flow(d, g, s);
        CHECK(std::abs(st.gauge_value - s * dg) < 1e-8 * s * dg);
        CHECK(std::abs(gauge(d, st.point) - s * dg) < 1e-8 * s * dg);
      }
      FlowState ab = flow(d, flow(d, g, 1.7).point, 0.6);
      FlowState once = flow(d, g, 1.7 * 0.6);
      CHECK(ambient_gap(ab.point, once.point) < 1e-7 * (1 + once.point.ambient().norm()));
    }
  }
}

TEST_CASE("the horizontal gradient norm is constant along each flow line") {
  auto G = make_heisenberg(2);
  auto d = make_gauge(G);
  SplitMix64 rng = stream_at(42, 0xf10a, 99);
  Point g = random_seed_point(G, rng);
  double base = horizontal_gradient_norm(d, g);
  std::vector<double> seen;
  flow(d, g, 3.0, {}, [&](double, const Point& p) { seen.push_back(horizontal_gradient_norm(d, p)); });
  REQUIRE(seen.size() > 3);
  for (double v : seen) CHECK(std::abs(v - base) < 1e-7 * base);
}

TEST_CASE("flow jacobian determinant equals s^Q") {
  SUBCASE("heisenberg") {
    auto G = make_heisenberg(1);
    auto d = make_gauge(G);
    Point g(Eigen::Vector2d(0.8, -0.4), Eigen::VectorXd::Constant(1, 0.3));
    CHECK(std::abs(jacobian_det_check(d, g, 2.0) - 1.0) < 1e-3);
  }
  SUBCASE("quaternionic") {
    auto G = make_quaternionic(1);
    auto d = make_gauge(G);
    Eigen::VectorXd x1(4), x2(3);
    x1 << 0.9, -0.2, 0.4, 0.1;
    x2 << 0.2, -0.1, 0.3;
    CHECK(std::abs(jacobian_det_check(d, Point(x1, x2), 0.5) - 1.0) < 1e-3);
  }
}

TEST_CASE("euclidean flow is plain scaling") {
  auto G = make_euclidean(3);
  auto d = make_gauge(G);
  Point g(Eigen::Vector3d(1.0, -2.0, 0.5), Eigen::VectorXd(0));
  FlowState st = flow(d, g, 0.37);
  CHECK((st.point.ambient() - 0.37 * g.ambient()).norm() < 1e-9);
}

TEST_CASE("flow rejects bad targets and characteristic seeds") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  Point ok(Eigen::Vector2d(1, 0), Eigen::VectorXd::Constant(1, 0.0));
  Point charpt(Eigen::Vector2d(0, 0), Eigen::VectorXd::Constant(1, 0.5));
  CHECK_THROWS_AS(flow(d, ok, 0.0), DomainError);
  CHECK_THROWS_AS(flow(d, ok, -1.0), DomainError);
  CHECK_THROWS_AS(flow(d, charpt, 2.0), FlowSingularityError);
  CHECK_THROWS_AS(project_to_sphere(d, Point(Eigen::Vector2d(0, 0), Eigen::VectorXd::Constant(1, 0.0))),
                  FlowSingularityError);
  CHECK(std::abs(gauge(d, project_to_sphere(d, ok)) - 1.0) < 1e-9);
}

TEST_CASE("sigma samples reproduce closed-form surface integrals") {
  SUBCASE("heisenberg total and horizontal energy") {
    auto G = make_heisenberg(1);
    auto d = make_gauge(G);
    auto ss = sigma_sample(d, 1.0, 2.0, 400000, 2024);
    CHECK(std::abs(ss.sigma_total - sphere_measure_total(d)) < 0.01 * sphere_measure_total(d));
    double energy = ss.weighted_sum([](const Point& p) { return p.first.squaredNorm(); });
    CHECK(std::abs(energy - horizontal_energy_total(d)) < 0.02 * horizontal_energy_total(d));
    CHECK(std::abs(horizontal_energy_total(d) - kPi) < 1e-12);
  }
  SUBCASE("euclidean sphere area") {
    auto G = make_euclidean(3);
    auto d = make_gauge(G);
    auto ss = sigma_sample(d, 1.0, 2.0, 200000, 7);
    CHECK(std::abs(ss.sigma_total - 4.0 * kPi) < 0.01 * 4.0 * kPi);
  }
  SUBCASE("bad annulus") {
    auto G = make_heisenberg(1);
    auto d = make_gauge(G);
    CHECK_THROWS_AS(sigma_sample(d, 2.0, 1.0, 100, 1), DomainError);
    CHECK_THROWS_AS(sigma_sample(d, 1.0, 2.0, 0, 1), DomainError);
  }
}

TEST_CASE("sigma sampling is independent of the thread count") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  auto a = sigma_sample(d, 1.0, 2.0, 50000, 99, {}, 1);
  auto b = sigma_sample(d, 1.0, 2.0, 50000, 99, {}, 4);
  REQUIRE(a.points.size() == b.points.size());
  CHECK(a.sigma_total == b.sigma_total);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.draw_index[i] == b.draw_index[i]);
    CHECK(ambient_gap(a.points[i], b.points[i]) == 0.0);
  }
}

TEST_CASE("polar integration formula closes to two percent") {
  auto G = make_heisenberg(1);
  auto d = make_gauge(G);
  BumpSpec bump;
  bump.radius = 2.0;
  auto u = [&](const Point& p) { return bump_profile(bump, gauge(d, p) / bump.radius); };

  PolarCheckOptions opt;
  opt.support_radius = 2.0;
  opt.annulus_a = 1.0;
  opt.annulus_b = 2.0;
  opt.sigma_draws = 120000;
  opt.lhs_cells = 48;
  opt.seed = 5;
  auto rep = polar_formula_check(d, u, opt);
  CHECK(rep.rel_err < 0.02);
  CHECK(rep.lhs > 0);
  CHECK(rep.rhs > 0);

  // second, non-radial test function
  auto v = [&](const Point& p) {
    double b = bump_profile(bump, gauge(d, p) / bump.radius);
    return b * (1.0 + 0.5 * p.first[0]);
  };
  auto rep2 = polar_formula_check(d, v, opt);
  CHECK(rep2.rel_err < 0.02);
}
