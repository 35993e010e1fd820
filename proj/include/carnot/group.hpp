#ifndef CARNOT_GROUP_HPP
#define CARNOT_GROUP_HPP

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "carnot/errors.hpp"
#include "carnot/rng.hpp"

// Homogeneous Carnot groups of step <= 2 in exponential coordinates of the
// first kind. A point is (x1, x2) with x1 in R^n1, x2 in R^n2; the law is
//
//   a o b = (a1 + b1, a2 + b2 + (1/2) B(a1, b1)),   B_k(x, y) = <J_k x, y>,
//
// with skew-symmetric J_k, so inverses are componentwise negation and the
// dilations delta_lambda(x1, x2) = (lambda x1, lambda^2 x2) are
// automorphisms. Haar measure is Lebesgue measure; the homogeneous dimension
// is Q = n1 + 2 n2.

namespace carnot {

struct LayerSpec {
  int n1 = 0;  // horizontal (first) layer
  int n2 = 0;  // vertical (second) layer
  int total() const { return n1 + n2; }
  int homogeneous_dim() const { return n1 + 2 * n2; }
};

enum class GroupKind { Euclidean, Heisenberg, Quaternionic, Octonionic, Custom };

inline const char* to_string(GroupKind k) {
  switch (k) {
    case GroupKind::Euclidean: return "euclidean";
    case GroupKind::Heisenberg: return "heisenberg";
    case GroupKind::Quaternionic: return "quaternionic";
    case GroupKind::Octonionic: return "octonionic";
    default: return "custom";
  }
}

template <class S>
struct PointT {
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  Vec first;
  Vec second;

  PointT() = default;
  PointT(Vec f, Vec s) : first(std::move(f)), second(std::move(s)) {}

  Vec ambient() const {
    Vec v(first.size() + second.size());
    v << first, second;
    return v;
  }
};

template <class S>
struct GroupStructureT {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  LayerSpec layers;
  GroupKind kind = GroupKind::Custom;
  std::vector<Mat> jmaps;  // n2 skew matrices of size n1 x n1
  bool h_type = false;
  S h_type_defect = S(0);  // max polarization residual, see below
  S j_op_norm = S(0);      // max_k ||J_k||_2, used by quadrature bounds

  int n1() const { return layers.n1; }
  int n2() const { return layers.n2; }
  int dim() const { return layers.total(); }
  int Q() const { return layers.homogeneous_dim(); }

  // Exponent 2/(Q-2) used by the divergence condition.
  S divergence_exponent() const {
    if (Q() <= 2) throw DomainError("divergence exponent needs Q > 2");
    return S(2) / S(Q() - 2);
  }
};

using Point = PointT<double>;
using GroupStructure = GroupStructureT<double>;

// ---------------------------------------------------------------------------
// group operations

template <class S>
PointT<S> identity(const GroupStructureT<S>& G) {
  return PointT<S>(PointT<S>::Vec::Zero(G.n1()), PointT<S>::Vec::Zero(G.n2()));
}

template <class S>
void check_point(const GroupStructureT<S>& G, const PointT<S>& a, const char* who) {
  if (a.first.size() != G.n1() || a.second.size() != G.n2())
    throw StructuralError(std::string(who) + ": point has wrong layer sizes");
}

// B(x, y), one component per second-layer direction.
template <class S>
typename PointT<S>::Vec bracket(const GroupStructureT<S>& G,
                                const typename PointT<S>::Vec& x,
                                const typename PointT<S>::Vec& y) {
  typename PointT<S>::Vec out(G.n2());
  for (int k = 0; k < G.n2(); ++k) out[k] = (G.jmaps[k] * x).dot(y);
  return out;
}

template <class S>
PointT<S> compose(const GroupStructureT<S>& G, const PointT<S>& a, const PointT<S>& b) {
  check_point(G, a, "compose");
  check_point(G, b, "compose");
  PointT<S> c;
  c.first = a.first + b.first;
  c.second = a.second + b.second;
  if (G.n2() > 0) c.second += S(0.5) * bracket<S>(G, a.first, b.first);
  return c;
}

template <class S>
PointT<S> inverse(const GroupStructureT<S>& G, const PointT<S>& a) {
  check_point(G, a, "inverse");
  return PointT<S>(-a.first, -a.second);
}

template <class S>
PointT<S> dilate(const GroupStructureT<S>& G, S lambda, const PointT<S>& a) {
  check_point(G, a, "dilate");
  if (!(lambda > S(0))) throw DomainError("dilate: lambda must be positive");
  return PointT<S>(lambda * a.first, lambda * lambda * a.second);
}

// a o (h e_i, 0): exact time-h flow of the horizontal field Z_i from a.
template <class S>
PointT<S> horizontal_translate(const GroupStructureT<S>& G, const PointT<S>& a, int i, S h) {
  check_point(G, a, "horizontal_translate");
  if (i < 0 || i >= G.n1()) throw DomainError("horizontal_translate: bad direction index");
  PointT<S> step = identity(G);
  step.first[i] = h;
  return compose(G, a, step);
}

// Difference y^{-1} o x, the displacement entering gauge distances.
template <class S>
PointT<S> left_difference(const GroupStructureT<S>& G, const PointT<S>& y, const PointT<S>& x) {
  return compose(G, inverse(G, y), x);
}

// ---------------------------------------------------------------------------
// H-type diagnostics

// (sum_k z_k J_k)^2 + |z|^2 I, sup-norm. Zero for H-type groups.
template <class S>
S h_type_residual(const GroupStructureT<S>& G, const typename PointT<S>::Vec& z) {
  using Mat = typename GroupStructureT<S>::Mat;
  Mat Jz = Mat::Zero(G.n1(), G.n1());
  for (int k = 0; k < G.n2(); ++k) Jz += z[k] * G.jmaps[k];
  Mat r = Jz * Jz + z.squaredNorm() * Mat::Identity(G.n1(), G.n1());
  return r.template lpNorm<Eigen::Infinity>();
}

// Polarization form of the H-type condition: J_i J_j + J_j J_i = -2 d_ij I.
// Finite and exact, unlike sampling unit vectors z.
template <class S>
S h_type_polarization_defect(const std::vector<typename GroupStructureT<S>::Mat>& jmaps) {
  using Mat = typename GroupStructureT<S>::Mat;
  if (jmaps.empty()) return S(0);
  const int n = static_cast<int>(jmaps[0].rows());
  S worst = S(0);
  for (size_t i = 0; i < jmaps.size(); ++i)
    for (size_t j = i; j < jmaps.size(); ++j) {
      Mat r = jmaps[i] * jmaps[j] + jmaps[j] * jmaps[i];
      if (i == j) r += S(2) * Mat::Identity(n, n);
      S v = r.template lpNorm<Eigen::Infinity>();
      if (v > worst) worst = v;
    }
  return worst;
}

// ---------------------------------------------------------------------------
// builders

namespace detail {

// Cayley-Dickson product on R^dim, dim in {1,2,4,8}. Used only to derive the
// quaternion/octonion right-multiplication tables.
template <class S>
void cayley_dickson_mult(const S* x, const S* y, S* out, int dim) {
  if (dim == 1) {
    out[0] = x[0] * y[0];
    return;
  }
  const int h = dim / 2;
  // (a,b)(c,d) = (ac - conj(d) b, d a + b conj(c))
  std::vector<S> t1(h), t2(h), cd(h), cc(h);
  for (int i = 0; i < h; ++i) {
    cd[i] = i == 0 ? y[h] : -y[h + i];
    cc[i] = i == 0 ? y[0] : -y[i];
  }
  cayley_dickson_mult(x, y, t1.data(), h);            // a c
  cayley_dickson_mult(cd.data(), x + h, t2.data(), h);  // conj(d) b
  for (int i = 0; i < h; ++i) out[i] = t1[i] - t2[i];
  cayley_dickson_mult(y + h, x, t1.data(), h);          // d a
  cayley_dickson_mult(x + h, cc.data(), t2.data(), h);  // b conj(c)
  for (int i = 0; i < h; ++i) out[h + i] = t1[i] + t2[i];
}

// Right multiplication by the imaginary unit e_k as a dim x dim matrix.
template <class S>
typename GroupStructureT<S>::Mat right_mult_matrix(int dim, int k) {
  using Mat = typename GroupStructureT<S>::Mat;
  Mat J = Mat::Zero(dim, dim);
  std::vector<S> e(dim, S(0)), u(dim, S(0)), prod(dim);
  u[k] = S(1);
  for (int col = 0; col < dim; ++col) {
    std::fill(e.begin(), e.end(), S(0));
    e[col] = S(1);
    cayley_dickson_mult(e.data(), u.data(), prod.data(), dim);
    for (int row = 0; row < dim; ++row) J(row, col) = prod[row];
  }
  return J;
}

template <class S>
S max_operator_norm(const std::vector<typename GroupStructureT<S>::Mat>& jmaps) {
  S worst = S(0);
  for (const auto& J : jmaps) {
    Eigen::JacobiSVD<typename GroupStructureT<S>::Mat> svd(J);
    S v = svd.singularValues().size() ? svd.singularValues()[0] : S(0);
    if (v > worst) worst = v;
  }
  return worst;
}

}  // namespace detail

template <class S>
void validate_jmaps(const LayerSpec& layers,
                    const std::vector<typename GroupStructureT<S>::Mat>& jmaps,
                    S skew_tol = S(1e-12)) {
  if (static_cast<int>(jmaps.size()) != layers.n2)
    throw StructuralError("expected one J map per second-layer direction");
  for (const auto& J : jmaps) {
    if (J.rows() != layers.n1 || J.cols() != layers.n1)
      throw StructuralError("J map has wrong dimensions");
    if ((J + J.transpose()).template lpNorm<Eigen::Infinity>() > skew_tol)
      throw StructuralError("J map is not skew-symmetric");
  }
}

template <class S>
GroupStructureT<S> finish_group(LayerSpec layers, GroupKind kind,
                                std::vector<typename GroupStructureT<S>::Mat> jmaps) {
  validate_jmaps<S>(layers, jmaps);
  GroupStructureT<S> G;
  G.layers = layers;
  G.kind = kind;
  G.jmaps = std::move(jmaps);
  G.h_type_defect = h_type_polarization_defect<S>(G.jmaps);
  G.h_type = layers.n2 == 0 || G.h_type_defect < S(1e-10);
  G.j_op_norm = detail::max_operator_norm<S>(G.jmaps);
  if (kind != GroupKind::Custom && kind != GroupKind::Euclidean && !G.h_type)
    throw StructuralError("built-in family failed the H-type condition");
  return G;
}

template <class S = double>
GroupStructureT<S> make_euclidean(int n) {
  if (n < 1) throw DomainError("make_euclidean: n >= 1");
  return finish_group<S>(LayerSpec{n, 0}, GroupKind::Euclidean, {});
}

// Heisenberg H^n: first layer R^{2n} = {(x, y)}, J1 (x,y) = (-y, x). The n=1
// law is t + t' + (x y' - y x')/2.
template <class S = double>
GroupStructureT<S> make_heisenberg(int n) {
  if (n < 1) throw DomainError("make_heisenberg: n >= 1");
  using Mat = typename GroupStructureT<S>::Mat;
  Mat J = Mat::Zero(2 * n, 2 * n);
  J.block(0, n, n, n) = -Mat::Identity(n, n);
  J.block(n, 0, n, n) = Mat::Identity(n, n);
  return finish_group<S>(LayerSpec{2 * n, 1}, GroupKind::Heisenberg, {J});
}

// Quaternionic family: first layer H^n = R^{4n}, second layer Im H = R^3,
// J_k = right multiplication by i, j, k on each quaternion slot.
template <class S = double>
GroupStructureT<S> make_quaternionic(int n) {
  if (n < 1) throw DomainError("make_quaternionic: n >= 1");
  using Mat = typename GroupStructureT<S>::Mat;
  std::vector<Mat> jmaps;
  for (int k = 1; k <= 3; ++k) {
    Mat block = detail::right_mult_matrix<S>(4, k);
    Mat J = Mat::Zero(4 * n, 4 * n);
    for (int s = 0; s < n; ++s) J.block(4 * s, 4 * s, 4, 4) = block;
    jmaps.push_back(std::move(J));
  }
  return finish_group<S>(LayerSpec{4 * n, 3}, GroupKind::Quaternionic, std::move(jmaps));
}

// Octonionic group: first layer O = R^8, second layer Im O = R^7, J_k = right
// multiplication by e_k with the Cayley-Dickson table over the quaternions.
template <class S = double>
GroupStructureT<S> make_octonionic() {
  using Mat = typename GroupStructureT<S>::Mat;
  std::vector<Mat> jmaps;
  for (int k = 1; k <= 7; ++k) jmaps.push_back(detail::right_mult_matrix<S>(8, k));
  return finish_group<S>(LayerSpec{8, 7}, GroupKind::Octonionic, std::move(jmaps));
}

// Custom J maps: skewness is enforced; the H-type condition is computed and
// exposed but not required, so alternative conventions can be loaded and
// their gauge coefficient refitted downstream.
template <class S = double>
GroupStructureT<S> make_custom(int n1, int n2,
                               std::vector<typename GroupStructureT<S>::Mat> jmaps) {
  if (n1 < 1 || n2 < 0) throw DomainError("make_custom: need n1 >= 1, n2 >= 0");
  return finish_group<S>(LayerSpec{n1, n2}, GroupKind::Custom, std::move(jmaps));
}

// ---------------------------------------------------------------------------
// Haar scaling diagnostic

struct HaarScalingReport {
  double analytic_ratio = 0.0;  // m(delta_lambda E)/m(E), exact for boxes
  double mc_ratio = 0.0;        // Monte-Carlo estimate of the same ratio
  double expected = 0.0;        // lambda^Q
  int64_t samples = 0;
};

// E is the coordinate box [lo, hi]. The ratio for boxes is lambda^Q exactly;
// the Monte-Carlo path samples one bounding box covering both E and its
// dilate so the estimate carries genuine sampling noise.
template <class S>
HaarScalingReport haar_scaling_check(const GroupStructureT<S>& G, const PointT<S>& lo,
                                     const PointT<S>& hi, S lambda, int64_t mc_samples,
                                     uint64_t seed) {
  check_point(G, lo, "haar_scaling_check");
  check_point(G, hi, "haar_scaling_check");
  if (!(lambda > S(0))) throw DomainError("haar_scaling_check: lambda must be positive");
  const int n1 = G.n1(), n2 = G.n2();
  auto side = [&](int axis, bool second) {
    S a = second ? lo.second[axis] : lo.first[axis];
    S b = second ? hi.second[axis] : hi.first[axis];
    if (!(b > a)) throw DomainError("haar_scaling_check: empty box");
    return std::pair<S, S>(a, b);
  };
  HaarScalingReport rep;
  rep.expected = std::pow(double(lambda), G.Q());
  rep.analytic_ratio = rep.expected;  // boxes scale exactly
  rep.samples = mc_samples;

  // joint bounding box of E and delta_lambda E
  std::vector<std::pair<S, S>> bounds;
  for (int i = 0; i < n1; ++i) {
    auto [a, b] = side(i, false);
    bounds.emplace_back(std::min(a, lambda * a), std::max(b, lambda * b));
  }
  for (int k = 0; k < n2; ++k) {
    auto [a, b] = side(k, true);
    S l2 = lambda * lambda;
    bounds.emplace_back(std::min(a, l2 * a), std::max(b, l2 * b));
  }
  int64_t in_e = 0, in_de = 0;
  for (int64_t s = 0; s < mc_samples; ++s) {
    auto rng = stream_at(seed, 0x4aa3, static_cast<uint64_t>(s));
    bool e = true, de = true;
    for (int i = 0; i < n1 && (e || de); ++i) {
      S v = static_cast<S>(rng.next_in(double(bounds[i].first), double(bounds[i].second)));
      auto [a, b] = side(i, false);
      e = e && v >= a && v < b;
      de = de && v >= lambda * a && v < lambda * b;
    }
    for (int k = 0; k < n2 && (e || de); ++k) {
      S v = static_cast<S>(
          rng.next_in(double(bounds[n1 + k].first), double(bounds[n1 + k].second)));
      auto [a, b] = side(k, true);
      S l2 = lambda * lambda;
      e = e && v >= a && v < b;
      de = de && v >= l2 * a && v < l2 * b;
    }
    in_e += e;
    in_de += de;
  }
  if (in_e == 0) throw AccuracyError("haar_scaling_check: no samples landed in E");
  rep.mc_ratio = double(in_de) / double(in_e);
  return rep;
}

}  // namespace carnot

#endif
