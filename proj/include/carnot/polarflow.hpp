#ifndef CARNOT_POLARFLOW_HPP
#define CARNOT_POLARFLOW_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "carnot/gauge.hpp"
#include "carnot/ode.hpp"

// Radial flow on the complement of the characteristic set, projection to the
// unit gauge sphere, the empirical surface measure sigma, and the polar
// integration formula check.
//
// The generator is X = d * grad0 d / |grad0 d|^2, embedded horizontally
// (second-layer velocity (1/2) B(x1, v1)), integrated in sigma = log s where
// the field is autonomous. Dividing by |grad0 d| only once cannot satisfy the
// defining identity d(phi(s,g)) = s d(g): the chain rule gives
// (d/ds) d(phi) = <grad0 d, v1>, which needs the square to cancel. With the
// square, gauge linearity holds exactly along the continuous flow,
// div X = Q gives det Dphi = s^Q, and |grad0 d| stays constant on each line,
// so the horizontal speed is the constant d(g)/|grad0 d|(g).
//
// On H-type groups with the standard gauge (and on Euclidean ones) the flow
// is evaluated in closed form, a dilation composed with a rotation by the
// second layer's complex structure; only x1 = 0 is singular there. Other
// gauges integrate the generator with an adaptive Runge-Kutta scheme, which
// cannot cross the characteristic band (the rotation rate blows up like
// |x1|^{-2}), so those seeds are rejected at opts.char_band_tol.

namespace carnot {

struct FlowState {
  Point point;
  double s = 1;
  double gauge_value = 0;
};

struct FlowOptions {
  OdeOptions ode{1e-9, 1e-12, 0.0, 1000000};
  double char_band_tol = 1e-6;  // |grad0 d| threshold for rejection
};

struct CharacteristicSet {
  double tol = 1e-6;
  bool contains(const GaugeFn& d, const Point& x) const {
    return in_characteristic_band(d, x, tol);
  }
};

FlowState flow(const GaugeFn& d, const Point& g, double s_target, const FlowOptions& opts,
               const std::function<void(double, const Point&)>& sink);

FlowState flow(const GaugeFn& d, const Point& g, double s_target, const FlowOptions& opts = {});

// Flows g to gauge 1; the unique intersection of its flow line with S.
Point project_to_sphere(const GaugeFn& d, const Point& g, const FlowOptions& opts = {});

// det of the finite-difference Jacobian of g -> phi(s, g), divided by s^Q.
double jacobian_det_check(const GaugeFn& d, const Point& g, double s, double fd_step = 1e-4,
                          const FlowOptions& opts = {});

struct SigmaSamples {
  std::vector<Point> points;            // projected to the unit sphere
  std::vector<long long> draw_index;    // index of the box draw that produced each point
  double weight = 0;                    // common weight of every sample
  long long n_draws = 0;
  long long n_accepted = 0;
  long long n_rejected_band = 0;        // characteristic-band rejections (logged)
  double acceptance_rate = 0;
  double sigma_total = 0;               // n_accepted * weight

  double weighted_sum(const std::function<double(const Point&)>& u) const {
    double acc = 0;
    for (const auto& p : points) acc += u(p);
    return acc * weight;
  }
};

// Rejection sampling of Lebesgue-uniform points in the annulus {a < d < b}
// minus the characteristic band, projected to S. With n box draws each
// accepted sample carries weight Q V_box / ((b^Q - a^Q) n), so weighted sums
// estimate integrals against sigma.
SigmaSamples sigma_sample(const GaugeFn& d, double a, double b, long long n, std::uint64_t seed,
                          const FlowOptions& opts = {}, int threads = 0);

struct PolarCheckOptions {
  double annulus_a = 1.0, annulus_b = 2.0;
  long long sigma_draws = 200000;
  double support_radius = 3.0;  // u vanishes for gauge > this
  int lhs_cells = 0;            // tensor-midpoint cells per axis; 0 selects MC
  long long lhs_mc = 0;
  std::uint64_t seed = 1;
  double s_floor = 1e-3;        // lower end of the s-quadrature
  double tol = 0.02;            // internal-agreement requirement per side
  FlowOptions flow{};
  int threads = 0;
};

struct PolarCheckReport {
  double lhs = 0, rhs = 0, rel_err = 0;
  double lhs_half = 0, rhs_half = 0;  // estimates from half the samples
  double sigma_total = 0;
  long long sigma_accepted = 0;
};

// Two-sided check of int u dx = int_0^inf int_S u(phi(s,v)) s^{Q-1} dsigma ds:
// lhs by direct quadrature over the support box, rhs by sigma samples with a
// flow-borne 1-D quadrature in s. Throws AccuracyError when either side
// disagrees with its own half-sample estimate beyond opt.tol.
PolarCheckReport polar_formula_check(const GaugeFn& d,
                                     const std::function<double(const Point&)>& u,
                                     const PolarCheckOptions& opt);

}  // namespace carnot

#endif
