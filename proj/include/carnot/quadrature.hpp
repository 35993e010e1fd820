#ifndef CARNOT_QUADRATURE_HPP
#define CARNOT_QUADRATURE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "carnot/errors.hpp"

namespace carnot {

namespace detail {

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw AccuracyError("adaptive_simpson: max depth reached");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on [a, b]. tol is absolute; integrands with an endpoint
// blow-up should be fed through panels (below) or a substitution first.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Integrates over [a, b] split into log-spaced panels toward a; suits
// integrands like t^{-p} whose scale varies over decades. a > 0 required.
template <class F>
double adaptive_simpson_logpanels(F&& f, double a, double b, double tol = 1e-10) {
  if (!(a > 0) || !(b > a)) throw DomainError("adaptive_simpson_logpanels: need 0 < a < b");
  const int panels = std::max(1, static_cast<int>(std::ceil(std::log2(b / a))));
  double total = 0.0;
  double lo = a;
  for (int p = 0; p < panels; ++p) {
    double hi = p + 1 == panels ? b : lo * 2.0;
    total += adaptive_simpson(f, lo, hi, tol / panels);
    lo = hi;
  }
  return total;
}

// Midpoint rule on a uniform n^k tensor grid over a box, dimension-agnostic.
// f receives the node coordinates; cells is the per-axis cell count.
template <class F>
double tensor_midpoint(F&& f, const std::vector<double>& lo, const std::vector<double>& hi,
                       const std::vector<int>& cells) {
  const size_t dim = lo.size();
  if (hi.size() != dim || cells.size() != dim)
    throw StructuralError("tensor_midpoint: mismatched box spec");
  int64_t total = 1;
  double vol = 1.0;
  std::vector<double> step(dim);
  for (size_t a = 0; a < dim; ++a) {
    if (cells[a] < 1 || !(hi[a] > lo[a])) throw DomainError("tensor_midpoint: bad axis");
    step[a] = (hi[a] - lo[a]) / cells[a];
    vol *= step[a];
    total *= cells[a];
  }
  double acc = 0.0;
  std::vector<double> x(dim);
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    for (size_t a = 0; a < dim; ++a) {
      int64_t c = rem % cells[a];
      rem /= cells[a];
      x[a] = lo[a] + (double(c) + 0.5) * step[a];
    }
    acc += f(x);
  }
  return acc * vol;
}

}  // namespace carnot

#endif
