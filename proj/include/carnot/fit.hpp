#ifndef CARNOT_FIT_HPP
#define CARNOT_FIT_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "carnot/errors.hpp"

namespace carnot {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_halfwidth = 0.0;  // 95% on the slope
};

// Ordinary least squares y = a + b x with the usual normal-theory interval.
// Two-sided 95% t quantiles for small n, 1.96 beyond the table.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n != y.size() || n < 2) throw DomainError("fit_line: need >= 2 matched points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (size_t i = 0; i < n; ++i) {
      double r = y[i] - (f.intercept + f.slope * x[i]);
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / double(n - 2) / sxx);
    static const double t95[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365,  2.306, 2.262, 2.228, 2.201, 2.179,
                                 2.160,  2.145, 2.131, 2.120, 2.110, 2.101};
    size_t dof = n - 2;
    double t = dof <= 18 ? t95[dof - 1] : 1.96;
    f.ci_halfwidth = t * f.slope_stderr;
  }
  return f;
}

}  // namespace carnot

#endif
