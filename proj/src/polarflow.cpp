#include "carnot/polarflow.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "carnot/measure.hpp"
#include "carnot/parallel.hpp"
#include "carnot/quadrature.hpp"
#include "carnot/rng.hpp"

namespace carnot {

namespace {

// First-layer components of X = d grad0 d / |grad0 d|^2 at ambient state x1/x2.
// With u = |x1|^2 x1 + (beta/4) J_{x2} x1 (so grad0 d = u / d^3) this is
// d^4 u / |u|^2. Throws when the state is inside the characteristic band.
Eigen::VectorXd radial_velocity(const GaugeFn& d, const Eigen::VectorXd& x1,
                                const Eigen::VectorXd& x2, double band_tol) {
  if (d.kind == GaugeKind::EuclideanNorm) {
    if (x1.squaredNorm() + x2.squaredNorm() == 0)
      throw FlowSingularityError("flow: reached the identity");
    return x1;  // Euclidean radial field; only n2 = 0 groups carry this kind
  }
  const GroupStructure& G = d.group;
  Eigen::VectorXd u = x1.squaredNorm() * x1;
  for (int k = 0; k < G.n2(); ++k) u += (d.beta / 4.0) * x2[k] * (G.jmaps[k] * x1);
  const double usq = u.squaredNorm();
  const double d4 = x1.squaredNorm() * x1.squaredNorm() + d.beta * x2.squaredNorm();
  if (d4 == 0) throw FlowSingularityError("flow: reached the identity");
  const double dd = std::sqrt(std::sqrt(d4));
  // |grad0 d| = |u| / d^3
  if (std::sqrt(usq) < band_tol * dd * dd * dd)
    throw FlowSingularityError("flow: trajectory entered the characteristic band");
  return (d4 / usq) * u;
}

Eigen::VectorXd flow_rhs(const GaugeFn& d, const Eigen::VectorXd& y, double band_tol) {
  const GroupStructure& G = d.group;
  const int n1 = G.n1(), n2 = G.n2();
  Eigen::VectorXd x1 = y.head(n1), x2 = y.segment(n1, n2);
  Eigen::VectorXd v1 = radial_velocity(d, x1, x2, band_tol);
  Eigen::VectorXd dy(y.size());
  dy.head(n1) = v1;
  if (n2 > 0) dy.segment(n1, n2) = 0.5 * bracket<double>(G, x1, v1);
  return dy;
}

// On H-type groups with the beta = 16 gauge the flow closes in elementary
// terms. The generator's first layer is (I + A)x1 with
// A = (4/|x1|^2) sum_k x2k J_k and A^2 = -(4|x2|/|x1|^2)^2 I, and both |x1|^2
// and x2 scale so that A stays constant along the line; the second layer obeys
// dx2/dsigma = 2 x2 outright. In sigma = log s the line is therefore
//   x1 -> s (cos(theta) x1 + sin(theta) Jz x1),  x2 -> s^2 x2,
// theta = 4 |x2| log(s) / |x1|^2, Jz the unit complex structure of x2. This
// also covers Euclidean gauges (A = 0). The only singular seeds are x1 = 0,
// and there is no stiffness near the characteristic set, which the DP45 path
// cannot traverse when |x1| is small (the rotation rate is 4|x2|/|x1|^2).
bool closed_flow_applies(const GaugeFn& d) {
  if (d.kind == GaugeKind::EuclideanNorm) return true;
  return d.group.h_type && d.beta == 16.0;
}

Point closed_flow_point(const GaugeFn& d, const Point& g, double s) {
  const GroupStructure& G = d.group;
  const double x1sq = g.first.squaredNorm();
  if (x1sq == 0.0 && gauge(d, g) > 0.0)
    throw FlowSingularityError("flow: seed lies on the characteristic set");
  if (x1sq == 0.0) throw FlowSingularityError("flow: undefined at the identity");
  Point out = g;
  out.second *= s * s;
  const double x2n = g.second.norm();
  if (x2n == 0.0) {
    out.first *= s;
    return out;
  }
  const double theta = 4.0 * x2n * std::log(s) / x1sq;
  Eigen::VectorXd jzx = Eigen::VectorXd::Zero(G.n1());
  for (int k = 0; k < G.n2(); ++k) jzx += (g.second[k] / x2n) * (G.jmaps[k] * g.first);
  out.first = s * (std::cos(theta) * g.first + std::sin(theta) * jzx);
  return out;
}

}  // namespace

FlowState flow(const GaugeFn& d, const Point& g, double s_target, const FlowOptions& opts,
               const std::function<void(double, const Point&)>& sink) {
  const GroupStructure& G = d.group;
  check_point(G, g, "flow");
  if (!(s_target > 0)) throw DomainError("flow: s_target must be positive");

  FlowState out;
  const double sigma_end = std::log(s_target);
  if (closed_flow_applies(d)) {
    if (sink && sigma_end != 0.0) {
      for (int i = 0; i <= 32; ++i) {
        double s = std::exp(sigma_end * static_cast<double>(i) / 32.0);
        sink(s, closed_flow_point(d, g, s));
      }
    }
    out.point = closed_flow_point(d, g, s_target);
  } else {
    if (in_characteristic_band(d, g, opts.char_band_tol))
      throw FlowSingularityError("flow: seed lies in the characteristic band");
    Eigen::VectorXd y = g.ambient();
    if (sigma_end != 0.0) {
      auto rhs = [&](double, const Eigen::VectorXd& state) {
        return flow_rhs(d, state, opts.char_band_tol);
      };
      auto on_step = [&](double sigma, const Eigen::VectorXd& state) {
        if (sink) sink(std::exp(sigma), point_from_ambient(G, state));
      };
      y = integrate_dp45(rhs, std::move(y), 0.0, sigma_end, opts.ode, on_step);
    }
    out.point = point_from_ambient(G, y);
  }
  out.s = s_target;
  out.gauge_value = gauge(d, out.point);
  return out;
}

FlowState flow(const GaugeFn& d, const Point& g, double s_target, const FlowOptions& opts) {
  return flow(d, g, s_target, opts, nullptr);
}

Point project_to_sphere(const GaugeFn& d, const Point& g, const FlowOptions& opts) {
  const double r = gauge(d, g);
  if (r == 0) throw FlowSingularityError("project_to_sphere: undefined at the identity");
  return flow(d, g, 1.0 / r, opts).point;
}

double jacobian_det_check(const GaugeFn& d, const Point& g, double s, double fd_step,
                          const FlowOptions& opts) {
  const GroupStructure& G = d.group;
  if (!(fd_step > 0)) throw DomainError("jacobian_det_check: fd_step must be positive");
  const int n = G.dim();
  Eigen::MatrixXd jac(n, n);
  const Eigen::VectorXd base = g.ambient();
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd hi = base, lo = base;
    hi[j] += fd_step;
    lo[j] -= fd_step;
    Eigen::VectorXd fhi = flow(d, point_from_ambient(G, hi), s, opts).point.ambient();
    Eigen::VectorXd flo = flow(d, point_from_ambient(G, lo), s, opts).point.ambient();
    jac.col(j) = (fhi - flo) / (2.0 * fd_step);
  }
  return jac.determinant() / std::pow(s, double(G.Q()));
}

SigmaSamples sigma_sample(const GaugeFn& d, double a, double b, long long n, std::uint64_t seed,
                          const FlowOptions& opts, int threads) {
  const GroupStructure& G = d.group;
  if (!(a > 0) || !(b > a)) throw DomainError("sigma_sample: need 0 < a < b");
  if (n <= 0) throw DomainError("sigma_sample: need draws");

  const int n1 = G.n1(), n2 = G.n2();
  const double half2 = d.kind == GaugeKind::EuclideanNorm ? b : b * b / std::sqrt(d.beta);
  double v_box = std::pow(2.0 * b, n1);
  for (int k = 0; k < n2; ++k) v_box *= 2.0 * half2;

  // status per draw: 0 rejected, 1 band-rejected, 2 accepted
  std::vector<char> status(static_cast<size_t>(n), 0);
  Eigen::MatrixXd pts(G.dim(), n);
  parallel_for(
      n,
      [&](int64_t i) {
        auto rng = stream_at(seed, 0x519a, static_cast<uint64_t>(i));
        Point x = identity(G);
        for (int k = 0; k < n1; ++k) x.first[k] = rng.next_in(-b, b);
        for (int k = 0; k < n2; ++k) x.second[k] = rng.next_in(-half2, half2);
        const double r = gauge(d, x);
        if (!(r > a && r < b)) return;
        if (in_characteristic_band(d, x, opts.char_band_tol)) {
          status[static_cast<size_t>(i)] = 1;
          return;
        }
        Point v;
        try {
          v = project_to_sphere(d, x, opts);
        } catch (const FlowSingularityError&) {
          status[static_cast<size_t>(i)] = 1;
          return;
        }
        status[static_cast<size_t>(i)] = 2;
        pts.col(i) = v.ambient();
      },
      threads);

  SigmaSamples out;
  out.n_draws = n;
  for (int64_t i = 0; i < n; ++i) {
    if (status[static_cast<size_t>(i)] == 1) ++out.n_rejected_band;
    if (status[static_cast<size_t>(i)] != 2) continue;
    out.points.push_back(point_from_ambient(G, pts.col(i)));
    out.draw_index.push_back(i);
  }
  out.n_accepted = static_cast<long long>(out.points.size());
  out.acceptance_rate = static_cast<double>(out.n_accepted) / static_cast<double>(n);
  if (out.acceptance_rate < 0.01)
    throw DomainError("sigma_sample: acceptance below 1 percent; box poorly matched to annulus");
  const double q = double(G.Q());
  out.weight = q * v_box / ((std::pow(b, q) - std::pow(a, q)) * static_cast<double>(n));
  out.sigma_total = out.weight * static_cast<double>(out.n_accepted);
  return out;
}

PolarCheckReport polar_formula_check(const GaugeFn& d,
                                     const std::function<double(const Point&)>& u,
                                     const PolarCheckOptions& opt) {
  const GroupStructure& G = d.group;
  if (!(opt.support_radius > 0)) throw DomainError("polar_formula_check: support radius");
  if (!(opt.s_floor > 0) || !(opt.s_floor < 1))
    throw DomainError("polar_formula_check: s_floor must lie in (0, 1)");
  if (opt.lhs_cells <= 0 && opt.lhs_mc <= 0)
    throw DomainError("polar_formula_check: choose a grid or MC sample count for the lhs");

  PolarCheckReport rep;
  const int n1 = G.n1(), n2 = G.n2();
  const double R = opt.support_radius;
  const double half2 = d.kind == GaugeKind::EuclideanNorm ? R : R * R / std::sqrt(d.beta);

  // lhs: direct quadrature over the support box
  if (opt.lhs_cells > 0) {
    std::vector<double> lo(G.dim()), hi(G.dim());
    std::vector<int> cells(G.dim(), opt.lhs_cells);
    for (int k = 0; k < n1; ++k) {
      lo[k] = -R;
      hi[k] = R;
    }
    for (int k = 0; k < n2; ++k) {
      lo[n1 + k] = -half2;
      hi[n1 + k] = half2;
    }
    Eigen::VectorXd xv(G.dim());
    auto f = [&](const std::vector<double>& x) {
      for (int k = 0; k < G.dim(); ++k) xv[k] = x[k];
      return u(point_from_ambient(G, xv));
    };
    rep.lhs = tensor_midpoint(f, lo, hi, cells);
    // internal agreement: half the resolution per axis
    std::vector<int> coarse(G.dim(), std::max(1, opt.lhs_cells / 2));
    rep.lhs_half = tensor_midpoint(f, lo, hi, coarse);
  } else {
    double v_box = std::pow(2.0 * R, n1);
    for (int k = 0; k < n2; ++k) v_box *= 2.0 * half2;
    auto term = [&](int64_t i) {
      auto rng = stream_at(opt.seed, 0x1e15, static_cast<uint64_t>(i));
      Point x = identity(G);
      for (int k = 0; k < n1; ++k) x.first[k] = rng.next_in(-R, R);
      for (int k = 0; k < n2; ++k) x.second[k] = rng.next_in(-half2, half2);
      return u(x);
    };
    const long long nh = opt.lhs_mc / 2;
    double s_lo = parallel_block_sum(nh, term, opt.threads);
    double s_hi =
        parallel_block_sum(opt.lhs_mc - nh, [&](int64_t i) { return term(i + nh); }, opt.threads);
    rep.lhs = v_box * (s_lo + s_hi) / static_cast<double>(opt.lhs_mc);
    rep.lhs_half = v_box * s_lo / static_cast<double>(nh);
  }

  // rhs: sigma samples, each carrying int u(phi(s,v)) s^{Q-1} ds
  SigmaSamples sig =
      sigma_sample(d, opt.annulus_a, opt.annulus_b, opt.sigma_draws, opt.seed, opt.flow,
                   opt.threads);
  rep.sigma_total = sig.sigma_total;
  rep.sigma_accepted = sig.n_accepted;

  const double q = double(G.Q());
  const double sigma_lo = std::log(opt.s_floor), sigma_hi = std::log(R);
  const bool closed = closed_flow_applies(d);
  const double line_tol = 1e-10 * (1.0 + std::pow(R, q));
  std::vector<double> line(static_cast<size_t>(sig.n_accepted));
  parallel_for(
      sig.n_accepted,
      [&](int64_t i) {
        const Point& v = sig.points[static_cast<size_t>(i)];
        if (closed) {
          auto f = [&](double sigma) {
            return u(closed_flow_point(d, v, std::exp(sigma))) * std::exp(q * sigma);
          };
          line[static_cast<size_t>(i)] = adaptive_simpson(f, sigma_lo, sigma_hi, line_tol);
          return;
        }
        auto rhs = [&](double sigma, const Eigen::VectorXd& y) {
          Eigen::VectorXd dy(y.size());
          dy.head(G.dim()) = flow_rhs(d, y.head(G.dim()), opt.flow.char_band_tol);
          dy[G.dim()] =
              u(point_from_ambient(G, y.head(G.dim()))) * std::exp(q * sigma);
          return dy;
        };
        Eigen::VectorXd y0(G.dim() + 1);
        y0.head(G.dim()) = v.ambient();
        y0[G.dim()] = 0;
        Eigen::VectorXd down = integrate_dp45(rhs, y0, 0.0, sigma_lo, opt.flow.ode);
        Eigen::VectorXd up = integrate_dp45(rhs, y0, 0.0, sigma_hi, opt.flow.ode);
        line[static_cast<size_t>(i)] = up[G.dim()] - down[G.dim()];
      },
      opt.threads);

  double acc = 0, acc_half = 0;
  for (int64_t i = 0; i < sig.n_accepted; ++i) {
    acc += line[static_cast<size_t>(i)];
    if (sig.draw_index[static_cast<size_t>(i)] < sig.n_draws / 2) acc_half += line[static_cast<size_t>(i)];
  }
  rep.rhs = sig.weight * acc;
  rep.rhs_half = 2.0 * sig.weight * acc_half;

  const double scale = std::max({std::abs(rep.lhs), std::abs(rep.rhs), 1e-300});
  rep.rel_err = std::abs(rep.lhs - rep.rhs) / scale;
  if (rep.lhs == 0 && rep.rhs == 0) rep.rel_err = 0;

  if (!(rep.lhs == 0 && rep.rhs == 0)) {
    if (std::abs(rep.lhs - rep.lhs_half) > opt.tol * scale ||
        std::abs(rep.rhs - rep.rhs_half) > opt.tol * scale)
      throw AccuracyError("polar_formula_check: a side failed its internal agreement check");
  }
  return rep;
}

}  // namespace carnot
