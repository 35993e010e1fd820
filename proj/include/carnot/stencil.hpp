#ifndef CARNOT_STENCIL_HPP
#define CARNOT_STENCIL_HPP

#include <utility>

#include "carnot/group.hpp"

// Horizontal finite differences. The one-parameter flow of the left-invariant
// field Z_i through a is exactly a o (h e_i, 0), so second differences along
// horizontal translates discretize Z_i^2 without any coordinate chart error;
// the only error is the 1-D O(h^2) stencil term.

namespace carnot {

inline constexpr double kDefaultStencilStep = 1e-3;

// Central difference for Z_i f at x.
template <class S, class F>
S horizontal_derivative(const GroupStructureT<S>& G, F&& f, const PointT<S>& x, int i, S h) {
  return (f(horizontal_translate(G, x, i, h)) - f(horizontal_translate(G, x, i, -h))) /
         (S(2) * h);
}

// sum_i [f(x o h e_i) - 2 f(x) + f(x o (-h) e_i)] / h^2.
template <class S, class F>
S sub_laplacian_stencil(const GroupStructureT<S>& G, F&& f, const PointT<S>& x, S h) {
  const S fx = f(x);
  S acc = S(0);
  for (int i = 0; i < G.n1(); ++i) {
    acc += f(horizontal_translate(G, x, i, h)) - S(2) * fx +
           f(horizontal_translate(G, x, i, -h));
  }
  return acc / (h * h);
}

// Optional Richardson pass: (4 A(h/2) - A(h)) / 3 cancels the h^2 term.
template <class S, class F>
S sub_laplacian_apply(const GroupStructureT<S>& G, F&& f, const PointT<S>& x,
                      S h = S(kDefaultStencilStep), bool richardson = false) {
  if (!(h > S(0))) throw DomainError("sub_laplacian_apply: h must be positive");
  S coarse = sub_laplacian_stencil(G, std::forward<F>(f), x, h);
  if (!richardson) return coarse;
  S fine = sub_laplacian_stencil(G, std::forward<F>(f), x, h / S(2));
  return (S(4) * fine - coarse) / S(3);
}

}  // namespace carnot

#endif
