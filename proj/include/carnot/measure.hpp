#ifndef CARNOT_MEASURE_HPP
#define CARNOT_MEASURE_HPP

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "carnot/group.hpp"

// Radon measures for potential evaluation: weighted atoms plus an optional
// grid density with cell-center values. Measures are immutable after
// construction; all mass is nonnegative.

namespace carnot {

// Axis-aligned box in ambient coordinates (first layer, then second).
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  bool contains(const Eigen::VectorXd& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
};

inline void check_box(const Box& b, const char* who) {
  if (b.lo.size() != b.hi.size() || b.lo.size() == 0)
    throw StructuralError(std::string(who) + ": malformed box");
  for (int i = 0; i < b.dim(); ++i) {
    if (!std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i]) || !(b.lo[i] < b.hi[i]))
      throw StructuralError(std::string(who) + ": box must be bounded with lo < hi");
  }
}

inline Point point_from_ambient(const GroupStructure& G, const Eigen::VectorXd& v) {
  if (v.size() != G.dim()) throw StructuralError("point_from_ambient: wrong length");
  return Point(v.head(G.n1()), v.tail(G.n2()));
}

// Regular grid density. values[flat] is the density at the center of cell
// (i_0,...,i_{dim-1}), flat index row-major (last axis fastest).
struct GridDensity {
  Eigen::VectorXd origin;       // corner of the grid (lowest cell corner)
  Eigen::VectorXd spacing;      // per-axis cell widths, > 0
  std::vector<int> shape;       // cells per axis
  std::vector<double> values;   // nonnegative, size = prod(shape)

  int dim() const { return static_cast<int>(shape.size()); }

  std::size_t cell_count() const {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    return n;
  }

  double cell_volume() const {
    double v = 1;
    for (int i = 0; i < dim(); ++i) v *= spacing[i];
    return v;
  }

  Eigen::VectorXd cell_center(std::size_t flat) const {
    Eigen::VectorXd c(dim());
    for (int ax = dim() - 1; ax >= 0; --ax) {
      std::size_t n = static_cast<std::size_t>(shape[ax]);
      std::size_t i = flat % n;
      flat /= n;
      c[ax] = origin[ax] + (static_cast<double>(i) + 0.5) * spacing[ax];
    }
    return c;
  }

  // Flat index of the cell containing x, or npos if outside the grid.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t locate(const Eigen::VectorXd& x) const {
    std::size_t flat = 0;
    for (int ax = 0; ax < dim(); ++ax) {
      double t = (x[ax] - origin[ax]) / spacing[ax];
      if (t < 0 || t >= static_cast<double>(shape[ax])) return npos;
      flat = flat * static_cast<std::size_t>(shape[ax]) + static_cast<std::size_t>(t);
    }
    return flat;
  }

  double total_mass() const {
    double m = 0;
    for (double v : values) m += v;
    return m * cell_volume();
  }

  Box bounding_box() const {
    Box b;
    b.lo = origin;
    b.hi = origin;
    for (int ax = 0; ax < dim(); ++ax) b.hi[ax] += spacing[ax] * shape[ax];
    return b;
  }
};

struct RadonMeasure {
  std::vector<std::pair<Point, double>> atoms;  // (location, weight >= 0)
  std::optional<GridDensity> density;
  std::optional<Box> support_box;

  double total_mass() const {
    double m = 0;
    for (const auto& [p, w] : atoms) m += w;
    if (density) m += density->total_mass();
    return m;
  }
};

inline void validate_measure(const GroupStructure& G, const RadonMeasure& mu) {
  for (const auto& [p, w] : mu.atoms) {
    check_point(G, p, "validate_measure");
    if (!(w >= 0) || !std::isfinite(w))
      throw StructuralError("validate_measure: atom weights must be finite and >= 0");
  }
  if (mu.density) {
    const GridDensity& rho = *mu.density;
    if (rho.dim() != G.dim() || rho.origin.size() != G.dim() || rho.spacing.size() != G.dim())
      throw StructuralError("validate_measure: density dimension mismatch");
    for (int ax = 0; ax < rho.dim(); ++ax) {
      if (!(rho.spacing[ax] > 0) || rho.shape[ax] <= 0)
        throw StructuralError("validate_measure: density grid needs positive spacing and shape");
    }
    if (rho.values.size() != rho.cell_count())
      throw StructuralError("validate_measure: density value count does not match shape");
    for (double v : rho.values)
      if (!(v >= 0) || !std::isfinite(v))
        throw StructuralError("validate_measure: density values must be finite and >= 0");
  }
  if (mu.support_box) {
    check_box(*mu.support_box, "validate_measure");
    for (const auto& [p, w] : mu.atoms)
      if (!mu.support_box->contains(p.ambient()))
        throw StructuralError("validate_measure: atom outside support box");
    if (mu.density) {
      Box g = mu.density->bounding_box();
      if (!mu.support_box->contains(g.lo) || !mu.support_box->contains(g.hi))
        throw StructuralError("validate_measure: density grid outside support box");
    }
  }
}

inline RadonMeasure make_atomic(std::vector<std::pair<Point, double>> atoms) {
  RadonMeasure mu;
  mu.atoms = std::move(atoms);
  return mu;
}

// a*mu1 + b*mu2 for a, b >= 0 (atoms concatenate; at most one density).
inline RadonMeasure combine(double a, const RadonMeasure& mu1, double b, const RadonMeasure& mu2) {
  if (a < 0 || b < 0) throw DomainError("combine: coefficients must be >= 0");
  if (mu1.density && mu2.density)
    throw StructuralError("combine: cannot combine two grid densities");
  RadonMeasure out;
  for (const auto& [p, w] : mu1.atoms) out.atoms.emplace_back(p, a * w);
  for (const auto& [p, w] : mu2.atoms) out.atoms.emplace_back(p, b * w);
  if (mu1.density) {
    out.density = mu1.density;
    for (double& v : out.density->values) v *= a;
  } else if (mu2.density) {
    out.density = mu2.density;
    for (double& v : out.density->values) v *= b;
  }
  return out;
}

// Pushforward by left translation x -> g o x. Atomic measures only: a grid
// density does not stay grid-aligned under the group shear.
inline RadonMeasure translate_measure(const GroupStructure& G, const Point& g,
                                      const RadonMeasure& mu) {
  if (mu.density)
    throw StructuralError("translate_measure: only atomic measures translate exactly");
  RadonMeasure out;
  for (const auto& [p, w] : mu.atoms) out.atoms.emplace_back(compose(G, g, p), w);
  return out;
}

// Pushforward by the dilation x -> delta_lambda(x) (atoms only).
inline RadonMeasure dilate_measure(const GroupStructure& G, double lambda,
                                   const RadonMeasure& mu) {
  if (mu.density)
    throw StructuralError("dilate_measure: only atomic measures dilate exactly");
  RadonMeasure out;
  for (const auto& [p, w] : mu.atoms) out.atoms.emplace_back(dilate(G, lambda, p), w);
  return out;
}

// Weighted sample cloud approximating H^s restricted to a set; the estimator
// currency of the dimension and continuity experiments.
struct EmpiricalMeasure {
  Eigen::MatrixXd points;        // ambient coordinates, one column per sample
  Eigen::VectorXd weights;       // >= 0
  double s = 0;                  // scaling exponent the weights refer to

  double total_mass() const { return weights.sum(); }
};

inline void validate_empirical(const GroupStructure& G, const EmpiricalMeasure& nu) {
  if (nu.points.rows() != G.dim())
    throw StructuralError("validate_empirical: ambient dimension mismatch");
  if (nu.weights.size() != nu.points.cols())
    throw StructuralError("validate_empirical: one weight per point required");
  for (Eigen::Index i = 0; i < nu.weights.size(); ++i)
    if (!(nu.weights[i] >= 0) || !std::isfinite(nu.weights[i]))
      throw StructuralError("validate_empirical: weights must be finite and >= 0");
}

inline RadonMeasure to_radon(const GroupStructure& G, const EmpiricalMeasure& nu) {
  validate_empirical(G, nu);
  RadonMeasure mu;
  mu.atoms.reserve(static_cast<std::size_t>(nu.points.cols()));
  for (Eigen::Index i = 0; i < nu.points.cols(); ++i)
    mu.atoms.emplace_back(point_from_ambient(G, nu.points.col(i)), nu.weights[i]);
  return mu;
}

}  // namespace carnot

#endif
