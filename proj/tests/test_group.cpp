#include <vector>

#include "carnot/group.hpp"
#include "doctest.h"

using namespace carnot;

namespace {

Point random_point(const GroupStructure& G, uint64_t seed, uint64_t i) {
  auto rng = stream_at(seed, 0x7e57, i);
  Point p = identity(G);
  for (int k = 0; k < G.n1(); ++k) p.first[k] = rng.next_in(-2.0, 2.0);
  for (int k = 0; k < G.n2(); ++k) p.second[k] = rng.next_in(-2.0, 2.0);
  return p;
}

double point_gap(const Point& a, const Point& b) {
  return (a.ambient() - b.ambient()).lpNorm<Eigen::Infinity>();
}

std::vector<GroupStructure> families() {
  return {make_euclidean(3), make_euclidean(5), make_heisenberg(1),
          make_heisenberg(2), make_quaternionic(1), make_octonionic()};
}

}  // namespace

TEST_CASE("heisenberg composition matches the hand computation") {
  auto H = make_heisenberg(1);
  Point a(Eigen::Vector2d(1, 0), Eigen::VectorXd::Zero(1));
  Point b(Eigen::Vector2d(0, 1), Eigen::VectorXd::Zero(1));
  Point c = compose(H, a, b);
  CHECK(c.first[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.first[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.second[0] == doctest::Approx(0.5).epsilon(1e-15));
  // reversed order flips the bracket sign
  Point d = compose(H, b, a);
  CHECK(d.second[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("quaternionic composition matches the right-multiplication table") {
  auto G = make_quaternionic(1);
  Point a = identity(G), b = identity(G);
  a.first[0] = 1.0;  // 1
  b.first[1] = 1.0;  // i
  Point c = compose(G, a, b);
  // B_k(1, i) = <1 * e_k, i> = delta_{k,1}
  CHECK(c.second[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.second[1] == 0.0);
  CHECK(c.second[2] == 0.0);
}

TEST_CASE("octonionic composition matches i(ik) = -j by hand") {
  auto G = make_octonionic();
  Point a = identity(G), b = identity(G);
  a.first[1] = 1.0;  // i
  b.first[2] = 1.0;  // j
  Point c = compose(G, a, b);
  // B_k(i, j) = <i e_k, j>; only e_3 = k gives i k = -j
  for (int k = 0; k < 7; ++k) {
    if (k == 2)
      CHECK(c.second[k] == doctest::Approx(-0.5).epsilon(1e-15));
    else
      CHECK(c.second[k] == 0.0);
  }
}

TEST_CASE("group laws hold to 1e-12 across the families") {
  for (const auto& G : families()) {
    CAPTURE(to_string(G.kind));
    double worst = 0.0;
    for (uint64_t i = 0; i < 2000; ++i) {
      Point a = random_point(G, 11, 3 * i), b = random_point(G, 11, 3 * i + 1),
            c = random_point(G, 11, 3 * i + 2);
      worst = std::max(worst, point_gap(compose(G, compose(G, a, b), c),
                                        compose(G, a, compose(G, b, c))));
      worst = std::max(worst, point_gap(compose(G, a, identity(G)), a));
      worst = std::max(worst, point_gap(compose(G, identity(G), a), a));
      worst = std::max(worst, point_gap(compose(G, a, inverse(G, a)), identity(G)));
      // dilations are automorphisms
      worst = std::max(worst, point_gap(dilate(G, 1.7, compose(G, a, b)),
                                        compose(G, dilate(G, 1.7, a), dilate(G, 1.7, b))));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("H-type condition holds for the built-in families and fails off them") {
  for (const auto& G : families()) {
    CAPTURE(to_string(G.kind));
    CHECK(G.h_type);
    CHECK(G.h_type_defect < 1e-10);
  }
  for (const auto& G : {make_heisenberg(2), make_quaternionic(2), make_octonionic()}) {
    CHECK(G.j_op_norm == doctest::Approx(1.0).epsilon(1e-12));
    auto rng = stream_at(5, 0xf00d, 7);
    Eigen::VectorXd z(G.n2());
    for (int k = 0; k < G.n2(); ++k) z[k] = rng.next_normal();
    z.normalize();
    CHECK(h_type_residual(G, z) < 1e-12);
  }
  // doubled bracket: 2 J^2 + 2 I = -6 I breaks the normalization
  Eigen::MatrixXd J(2, 2);
  J << 0, 2, -2, 0;
  auto C = make_custom(2, 1, {J});
  CHECK_FALSE(C.h_type);
  CHECK(C.h_type_defect == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("jmaps validation rejects malformed input") {
  Eigen::MatrixXd J(2, 2);
  J << 0, 1, 0.5, 0;  // not skew
  CHECK_THROWS_AS(make_custom(2, 1, {J}), StructuralError);
  CHECK_THROWS_AS(make_custom(2, 2, {Eigen::MatrixXd::Zero(2, 2)}), StructuralError);
  CHECK_THROWS_AS(make_heisenberg(0), DomainError);
  CHECK_THROWS_AS(make_euclidean(0), DomainError);
}

TEST_CASE("horizontal translate is the group flow of Z_i") {
  auto G = make_heisenberg(1);
  Point a = random_point(G, 17, 0);
  Point step = identity(G);
  step.first[1] = 0.25;
  CHECK(point_gap(horizontal_translate(G, a, 1, 0.25), compose(G, a, step)) == 0.0);
  CHECK_THROWS_AS(horizontal_translate(G, a, 5, 0.1), DomainError);
}

TEST_CASE("haar scaling: boxes scale by lambda^Q and MC agrees") {
  auto G = make_heisenberg(1);
  Point lo = identity(G), hi = identity(G);
  lo.first << -1, -1;
  lo.second << -1;
  hi.first << 1, 1;
  hi.second << 1;
  auto rep = haar_scaling_check(G, lo, hi, 1.3, 400000, 99);
  CHECK(rep.analytic_ratio == doctest::Approx(std::pow(1.3, 4)).epsilon(1e-14));
  CHECK(rep.mc_ratio == doctest::Approx(rep.expected).epsilon(0.05));
  CHECK_THROWS_AS(haar_scaling_check(G, lo, hi, -1.0, 10, 1), DomainError);
}

TEST_CASE("divergence exponent is 2/(Q-2)") {
  CHECK(make_heisenberg(1).divergence_exponent() == doctest::Approx(1.0));
  CHECK(make_euclidean(3).divergence_exponent() == doctest::Approx(2.0));
  CHECK(make_quaternionic(1).divergence_exponent() == doctest::Approx(0.25));
  CHECK_THROWS_AS(make_euclidean(2).divergence_exponent(), DomainError);
}
