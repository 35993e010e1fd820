#include "carnot/gauge.hpp"

#include <cmath>

#include "carnot/parallel.hpp"

namespace carnot {

// c solves c * int d^{2-Q} L(phi) dx = -phi(e) for the gauge-radial bump phi.
// Midpoint tensor quadrature over the support box (even per-axis counts keep
// nodes off the pole; the pole's neighborhood contributes O(step^2)), stencil
// sub-Laplacian on phi, one doubling as the convergence certificate.
CalibrationReport calibrate_constant(GaugeFn& g, const BumpSpec& bump,
                                     const CalibrationGrid& grid) {
  const auto& G = g.group;
  if (G.Q() <= 2) throw DomainError("calibrate_constant: needs Q > 2");
  if (!(bump.radius > 0)) throw DomainError("calibrate_constant: bump radius must be positive");
  const int dim = G.dim(), n1 = G.n1();
  int cells = grid.cells;
  if (cells <= 0) cells = std::max(8, int(std::llround(std::pow(2.0e6, 1.0 / dim))));
  if (cells % 2) ++cells;

  const double r = bump.radius;
  const double h = grid.stencil_h_rel * r;
  auto phi = [&](const Point& x) { return bump_profile(bump, gauge(g, x) / r); };

  const bool euclid = g.kind == GaugeKind::EuclideanNorm;
  Eigen::VectorXd lo(dim), hi(dim);
  for (int i = 0; i < n1; ++i) {
    lo[i] = -r;
    hi[i] = r;
  }
  for (int k = 0; k < G.n2(); ++k) {
    double b2 = euclid ? r : r * r / std::sqrt(g.beta);
    lo[n1 + k] = -b2;
    hi[n1 + k] = b2;
  }

  auto level = [&](int c) {
    Eigen::VectorXd step = (hi - lo) / double(c);
    double cellvol = step.prod();
    int64_t total = 1;
    for (int i = 0; i < dim; ++i) total *= c;
    double acc = parallel_block_sum(
        total,
        [&](int64_t idx) {
          Point x = identity(G);
          int64_t rem = idx;
          for (int i = 0; i < dim; ++i) {
            int64_t ci = rem % c;
            rem /= c;
            double v = lo[i] + (double(ci) + 0.5) * step[i];
            if (i < n1)
              x.first[i] = v;
            else
              x.second[i - n1] = v;
          }
          double d = gauge(g, x);
          // stencil legs sit within gauge distance h of x, so the bump is
          // constant across the whole stencil outside the ramp annulus
          if (d > r + 2.0 * h || d < bump.plateau * r - 2.0 * h) return 0.0;
          return std::pow(d, 2.0 - G.Q()) * sub_laplacian_apply(G, phi, x, h);
        },
        grid.threads);
    return acc * cellvol;
  };

  const double phi0 = bump_profile(bump, 0.0);
  double a1 = level(cells), a2 = level(2 * cells);
  if (!(a1 < 0.0) || !(a2 < 0.0))
    throw AccuracyError("calibrate_constant: quadrature lost the sign of the identity");
  CalibrationReport rep;
  rep.coarse = -phi0 / a1;
  rep.c_gamma = -phi0 / a2;
  rep.rel_gap = std::abs(rep.c_gamma - rep.coarse) / rep.c_gamma;
  if (!(rep.rel_gap <= 0.01))
    throw AccuracyError("calibrate_constant: quadrature refinements disagree");
  g.c_gamma = rep.c_gamma;
  g.calibrated = true;
  return rep;
}

}  // namespace carnot
