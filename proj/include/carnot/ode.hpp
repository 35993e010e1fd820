#ifndef CARNOT_ODE_HPP
#define CARNOT_ODE_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>

#include "carnot/errors.hpp"

// Embedded Dormand-Prince 5(4) with the usual PI-free step control. States
// are dynamic Eigen vectors; the quadratures that ride along a trajectory are
// carried as extra state components rather than through dense output.

namespace carnot {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  double initial_step = 0.0;  // 0: (t1 - t0)/64
  int64_t max_steps = 1000000;
};

// rhs(t, y) -> dy/dt. on_step(t, y) is invoked after every accepted step and
// may throw to abort (the flow uses this for the characteristic guard).
template <class RHS, class StepFn>
Eigen::VectorXd integrate_dp45(RHS&& rhs, Eigen::VectorXd y, double t0, double t1,
                               const OdeOptions& opt, StepFn&& on_step) {
  using Vec = Eigen::VectorXd;
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  if (t1 == t0) return y;
  const double span = t1 - t0;
  const double dir = span > 0 ? 1.0 : -1.0;
  double h = opt.initial_step != 0.0 ? std::abs(opt.initial_step) * dir : span / 64.0;
  double t = t0;
  Vec k1 = rhs(t, y);
  for (int64_t step = 0; step < opt.max_steps; ++step) {
    if (dir * (t - t1) >= 0) return y;
    if (dir * (t + h - t1) > 0) h = t1 - t;
    if (std::abs(h) < 1e-14 * (std::abs(span) + std::abs(t)))
      throw AccuracyError("integrate_dp45: step size underflow");

    Vec k2 = rhs(t + c2 * h, y + h * (a21 * k1));
    Vec k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    Vec k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vec y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec k7 = rhs(t + h, y1);  // FSAL
    Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm2 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
      double q = err[i] / sc;
      norm2 += q * q;
    }
    double en = std::sqrt(norm2 / double(y.size()));
    if (en <= 1.0) {
      t += h;
      y = std::move(y1);
      k1 = std::move(k7);
      on_step(t, y);
      if (dir * (t - t1) >= 0) return y;
    }
    double fac = en > 0 ? 0.9 * std::pow(en, -0.2) : 5.0;
    h *= std::clamp(fac, 0.2, 5.0);
  }
  throw AccuracyError("integrate_dp45: max step count exceeded");
}

template <class RHS>
Eigen::VectorXd integrate_dp45(RHS&& rhs, Eigen::VectorXd y, double t0, double t1,
                               const OdeOptions& opt = {}) {
  return integrate_dp45(std::forward<RHS>(rhs), std::move(y), t0, t1, opt,
                        [](double, const Eigen::VectorXd&) {});
}

}  // namespace carnot

#endif
