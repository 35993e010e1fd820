#ifndef CARNOT_POTENTIAL_HPP
#define CARNOT_POTENTIAL_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "carnot/gauge.hpp"
#include "carnot/measure.hpp"

// Potentials R(x) = integral of Gamma(y^{-1} o x) against a Radon measure,
// the finite-difference superharmonicity scan, and the divergence-integral
// probe along horizontal curves.

namespace carnot {

// Extended value: returns +infinity (deliberately, never by overflow) when x
// carries an atom. Grid densities integrate by midpoint rule; the cell
// containing x is refined to depth 6 with the subcell holding x dropped at
// the bottom, a relative bias of order (cell size)^2.
double potential_eval(const GaugeFn& d, const RadonMeasure& mu, const Point& x);

// Deterministic batch evaluation: the result vector does not depend on the
// thread count.
std::vector<double> potential_eval_batch(const GaugeFn& d, const RadonMeasure& mu,
                                         const std::vector<Point>& xs, int threads = 0);

struct SuperharmonicityReport {
  int n_points = 0;          // stencil-evaluated grid points (off support)
  int n_skipped = 0;         // grid points skipped near the density support
  double min_neg_laplacian = 0;
  double max_neg_laplacian = 0;
  double max_scaled_residual = 0;  // max |Delta R| * rho^Q / mass
};

// Scans -Delta R over a cell-center grid of `grid` cells per axis inside
// `box`. Grid points closer than 3h (gauge) to an atom violate the
// precondition; points whose stencil touches the density support are skipped
// and counted, so every reported value sits in the region where the discrete
// potential is exactly harmonic up to stencil truncation.
SuperharmonicityReport superharmonicity_scan(const GaugeFn& d, const RadonMeasure& mu,
                                             const Box& box, const std::vector<int>& grid,
                                             double h);

// Horizontal curve on [0, delta]: by default the ray t -> start o (t u, 0),
// whose velocity is exactly horizontal; `custom` overrides the rule and is
// checked a posteriori.
struct HorizontalCurve {
  Point start;
  Eigen::VectorXd u;
  double delta = 1;
  std::function<Point(double)> custom;
};

HorizontalCurve make_horizontal_ray(const GroupStructure& G, Point start,
                                    Eigen::VectorXd u, double delta);

Point curve_point(const GroupStructure& G, const HorizontalCurve& c, double t);

// Finite-difference check that the second-layer velocity equals
// (1/2) B(x1, dx1/dt) at sampled times. Throws StructuralError on failure.
void check_horizontality(const GroupStructure& G, const HorizontalCurve& c,
                         int n_samples = 32, double fd_step = 1e-4);

// Integral of R(gamma(t))^exponent over [t_min, delta]. Divergence is probed
// by the caller through the growth as t_min decreases; an infinite potential
// value on the curve yields +infinity.
double horizontal_curve_integrate(const GaugeFn& d, const RadonMeasure& mu,
                                  const HorizontalCurve& gamma, double exponent,
                                  double t_min, double quad_tol = 1e-9);

// Same with the group's divergence exponent 2/(Q-2).
double horizontal_curve_integrate(const GaugeFn& d, const RadonMeasure& mu,
                                  const HorizontalCurve& gamma, double t_min);

struct FinitenessParams {
  double alpha = 0;
  double delta = 0.5;           // radial integration range
  long long n_draws = 200000;
  std::uint64_t seed = 1;
  double giraud_constant = 0;   // if > 0, report the kernel-composition bound
  int threads = 0;
};

struct FinitenessReport {
  double estimate = 0;
  double half_estimate = 0;
  double rel_drift = 0;
  bool converged = false;       // drift within 2 percent over the last doubling
  double bound = 0;             // analytic cross-check, 0 when not requested
  bool bound_covers = false;
  long long n_draws = 0;
};

// Monte-Carlo estimate of the triple integral
//   int_{S'} dH(p) int_{sphere} dsigma int_0^delta R(p + r w) r^alpha dr
// on Euclidean R^N, N in {4,5}. alpha = 0 is the admissible N=4 case (the
// interpolation step the strict inequality guards is not needed there);
// N=5 requires -1 < alpha < 1/2.
FinitenessReport euclidean_finiteness_experiment(int N, const RadonMeasure& mu,
                                                 const EmpiricalMeasure& sprime,
                                                 const FinitenessParams& prm);

}  // namespace carnot

#endif
