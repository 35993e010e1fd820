#include "carnot/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "carnot/parallel.hpp"
#include "carnot/quadrature.hpp"
#include "carnot/rng.hpp"

namespace carnot {

namespace {

struct Diverged {};  // unwinds a +infinity integrand out of the quadrature

// Midpoint sum over the 3^dim subdivision of the cell around x, recursing on
// the subcell that holds x and dropping it at the final depth. rho is the
// cell's constant density value.
double singular_cell_quadrature(const GaugeFn& d, double rho, Eigen::VectorXd lo,
                                Eigen::VectorXd hi, const Point& x, int depth) {
  const GroupStructure& G = d.group;
  const int dim = G.dim();
  const Eigen::VectorXd x_amb = x.ambient();
  int total = 1;
  for (int ax = 0; ax < dim; ++ax) total *= 3;
  double acc = 0;
  std::vector<int> jx(dim);
  Eigen::VectorXd c(dim);
  for (int level = 0; level < depth; ++level) {
    const Eigen::VectorXd w = (hi - lo) / 3.0;
    double subvol = 1;
    for (int ax = 0; ax < dim; ++ax) {
      subvol *= w[ax];
      int j = static_cast<int>(std::floor((x_amb[ax] - lo[ax]) / w[ax]));
      jx[ax] = std::clamp(j, 0, 2);
    }
    for (int flat = 0; flat < total; ++flat) {
      int rem = flat;
      bool holds_x = true;
      for (int ax = dim - 1; ax >= 0; --ax) {
        int j = rem % 3;
        rem /= 3;
        if (j != jx[ax]) holds_x = false;
        c[ax] = lo[ax] + (j + 0.5) * w[ax];
      }
      if (holds_x) continue;
      Point y = point_from_ambient(G, c);
      acc += rho * subvol * fundamental_solution(d, left_difference(G, y, x));
    }
    for (int ax = 0; ax < dim; ++ax) {
      lo[ax] += jx[ax] * w[ax];
      hi[ax] = lo[ax] + w[ax];
    }
  }
  return acc;
}

}  // namespace

double potential_eval(const GaugeFn& d, const RadonMeasure& mu, const Point& x) {
  const GroupStructure& G = d.group;
  check_point(G, x, "potential_eval");
  const double q_exp = 2.0 - G.Q();
  double acc = 0;
  for (const auto& [y, w] : mu.atoms) {
    if (w == 0) continue;
    double r = gauge_distance(d, x, y);
    if (r == 0) return std::numeric_limits<double>::infinity();
    acc += w * d.c_gamma * std::pow(r, q_exp);
  }
  if (mu.density) {
    const GridDensity& rho = *mu.density;
    const std::size_t singular = rho.locate(x.ambient());
    const double vol = rho.cell_volume();
    const std::size_t n = rho.cell_count();
    for (std::size_t cell = 0; cell < n; ++cell) {
      const double val = rho.values[cell];
      if (val == 0 || cell == singular) continue;
      Point y = point_from_ambient(G, rho.cell_center(cell));
      acc += val * vol * fundamental_solution(d, left_difference(G, y, x));
    }
    if (singular != GridDensity::npos && rho.values[singular] > 0) {
      Eigen::VectorXd c = rho.cell_center(singular);
      acc += singular_cell_quadrature(d, rho.values[singular], c - 0.5 * rho.spacing,
                                      c + 0.5 * rho.spacing, x, 6);
    }
  }
  return acc;
}

std::vector<double> potential_eval_batch(const GaugeFn& d, const RadonMeasure& mu,
                                         const std::vector<Point>& xs, int threads) {
  std::vector<double> out(xs.size());
  parallel_for(
      static_cast<int64_t>(xs.size()),
      [&](int64_t i) { out[static_cast<size_t>(i)] = potential_eval(d, mu, xs[i]); }, threads);
  return out;
}

SuperharmonicityReport superharmonicity_scan(const GaugeFn& d, const RadonMeasure& mu,
                                             const Box& box, const std::vector<int>& grid,
                                             double h) {
  const GroupStructure& G = d.group;
  check_box(box, "superharmonicity_scan");
  validate_measure(G, mu);
  if (static_cast<int>(grid.size()) != G.dim())
    throw StructuralError("superharmonicity_scan: one grid count per axis required");
  for (int g : grid)
    if (g <= 0) throw StructuralError("superharmonicity_scan: grid counts must be positive");
  if (!(h > 0)) throw DomainError("superharmonicity_scan: h must be positive");

  Box density_bbox;
  bool have_density = mu.density.has_value();
  if (have_density) density_bbox = mu.density->bounding_box();

  // support points for the residual scale rho(x)^Q
  std::vector<Point> support;
  for (const auto& [p, w] : mu.atoms)
    if (w > 0) support.push_back(p);
  if (have_density) {
    const GridDensity& rho = *mu.density;
    for (std::size_t cidx = 0; cidx < rho.cell_count(); ++cidx)
      if (rho.values[cidx] > 0) support.push_back(point_from_ambient(G, rho.cell_center(cidx)));
  }
  const double mass = mu.total_mass();

  int64_t total = 1;
  for (int g : grid) total *= g;

  SuperharmonicityReport rep;
  rep.min_neg_laplacian = std::numeric_limits<double>::infinity();
  rep.max_neg_laplacian = -std::numeric_limits<double>::infinity();
  auto field = [&](const Point& p) { return potential_eval(d, mu, p); };

  Eigen::VectorXd coord(G.dim());
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat;
    for (int ax = 0; ax < G.dim(); ++ax) {
      int64_t i = rem % grid[ax];
      rem /= grid[ax];
      coord[ax] = box.lo[ax] + (static_cast<double>(i) + 0.5) * (box.hi[ax] - box.lo[ax]) / grid[ax];
    }
    Point x = point_from_ambient(G, coord);
    for (const auto& [p, w] : mu.atoms) {
      if (w > 0 && gauge_distance(d, x, p) < 3 * h)
        throw DomainError("superharmonicity_scan: grid point within 3h of an atom");
    }
    if (have_density) {
      bool touches = density_bbox.contains(coord);
      for (int i = 0; i < G.n1() && !touches; ++i) {
        touches = density_bbox.contains(horizontal_translate(G, x, i, h).ambient()) ||
                  density_bbox.contains(horizontal_translate(G, x, i, -h).ambient());
      }
      if (touches) {
        ++rep.n_skipped;
        continue;
      }
    }
    double lap = sub_laplacian_apply(G, field, x, h, false);
    double neg = -lap;
    rep.min_neg_laplacian = std::min(rep.min_neg_laplacian, neg);
    rep.max_neg_laplacian = std::max(rep.max_neg_laplacian, neg);
    double rho_min = std::numeric_limits<double>::infinity();
    for (const Point& p : support) rho_min = std::min(rho_min, gauge_distance(d, x, p));
    if (mass > 0 && std::isfinite(rho_min)) {
      double scaled = std::abs(lap) * std::pow(rho_min, double(G.Q())) / mass;
      rep.max_scaled_residual = std::max(rep.max_scaled_residual, scaled);
    }
    ++rep.n_points;
  }
  if (rep.n_points == 0) throw DomainError("superharmonicity_scan: no grid point off the support");
  return rep;
}

HorizontalCurve make_horizontal_ray(const GroupStructure& G, Point start, Eigen::VectorXd u,
                                    double delta) {
  check_point(G, start, "make_horizontal_ray");
  if (u.size() != G.n1())
    throw StructuralError("make_horizontal_ray: direction must have first-layer length");
  if (!(delta > 0)) throw DomainError("make_horizontal_ray: delta must be positive");
  HorizontalCurve c;
  c.start = std::move(start);
  c.u = std::move(u);
  c.delta = delta;
  return c;
}

Point curve_point(const GroupStructure& G, const HorizontalCurve& c, double t) {
  if (c.custom) {
    Point p = c.custom(t);
    check_point(G, p, "curve_point");
    return p;
  }
  Point step(t * c.u, Eigen::VectorXd::Zero(G.n2()));
  return compose(G, c.start, step);
}

void check_horizontality(const GroupStructure& G, const HorizontalCurve& c, int n_samples,
                         double fd_step) {
  if (!(c.delta > 0)) throw DomainError("check_horizontality: empty domain");
  if (G.n2() == 0) return;
  const double s = std::min(fd_step, 0.25 * c.delta);
  for (int j = 0; j < n_samples; ++j) {
    double t = c.delta * (j + 0.5) / n_samples;
    double tl = std::max(t - s, 0.0), tr = std::min(t + s, c.delta);
    Point pl = curve_point(G, c, tl);
    Point pr = curve_point(G, c, tr);
    Point pm = curve_point(G, c, t);
    Eigen::VectorXd v1 = (pr.first - pl.first) / (tr - tl);
    Eigen::VectorXd v2 = (pr.second - pl.second) / (tr - tl);
    Eigen::VectorXd resid = v2 - 0.5 * bracket<double>(G, pm.first, v1);
    double vscale = std::max(1.0, v1.lpNorm<Eigen::Infinity>());
    if (resid.lpNorm<Eigen::Infinity>() > 1e-6 * s * vscale)
      throw StructuralError("check_horizontality: second-layer velocity is not (1/2) B(x1, dx1)");
  }
}

double horizontal_curve_integrate(const GaugeFn& d, const RadonMeasure& mu,
                                  const HorizontalCurve& gamma, double exponent, double t_min,
                                  double quad_tol) {
  const GroupStructure& G = d.group;
  if (!(t_min > 0) || !(t_min < gamma.delta))
    throw DomainError("horizontal_curve_integrate: t_min must lie in (0, delta)");
  check_horizontality(G, gamma);
  if (exponent == 0) return gamma.delta - t_min;
  auto f = [&](double t) {
    double r = potential_eval(d, mu, curve_point(G, gamma, t));
    double v = std::pow(r, exponent);
    if (std::isinf(v)) throw Diverged{};
    return v;
  };
  try {
    return adaptive_simpson_logpanels(f, t_min, gamma.delta, quad_tol);
  } catch (const Diverged&) {
    return std::numeric_limits<double>::infinity();
  }
}

double horizontal_curve_integrate(const GaugeFn& d, const RadonMeasure& mu,
                                  const HorizontalCurve& gamma, double t_min) {
  return horizontal_curve_integrate(d, mu, gamma, d.group.divergence_exponent(), t_min, 1e-9);
}

FinitenessReport euclidean_finiteness_experiment(int N, const RadonMeasure& mu,
                                                 const EmpiricalMeasure& sprime,
                                                 const FinitenessParams& prm) {
  if (N != 4 && N != 5)
    throw DomainError("euclidean_finiteness_experiment: N must be 4 or 5");
  if (N == 4) {
    if (prm.alpha != 0)
      throw DomainError(
          "euclidean_finiteness_experiment: N = 4 admits exactly alpha = 0 (the interpolation "
          "step behind alpha < (N-4)/2 is not needed there)");
  } else if (!(prm.alpha > -1 && prm.alpha < 0.5)) {
    throw DomainError("euclidean_finiteness_experiment: need -1 < alpha < (N-4)/2");
  }
  if (!(prm.delta > 0)) throw DomainError("euclidean_finiteness_experiment: delta must be positive");
  if (prm.n_draws < 2) throw DomainError("euclidean_finiteness_experiment: need at least 2 draws");

  GroupStructure G = make_euclidean(N);
  GaugeFn d = make_gauge(G);
  validate_measure(G, mu);
  validate_empirical(G, sprime);

  FinitenessReport rep;
  rep.n_draws = prm.n_draws;
  if (mu.total_mass() == 0) {
    rep.converged = true;
    return rep;
  }
  const double w_total = sprime.total_mass();
  if (!(w_total > 0))
    throw DomainError("euclidean_finiteness_experiment: S' must carry positive mass");

  Eigen::VectorXd cum(sprime.weights.size());
  double running = 0;
  for (Eigen::Index i = 0; i < sprime.weights.size(); ++i) cum[i] = (running += sprime.weights[i]);

  const double sphere = detail::unit_sphere_area(N);
  const double radial_norm = std::pow(prm.delta, 1.0 + prm.alpha) / (1.0 + prm.alpha);
  auto term = [&](int64_t i) {
    auto rng = stream_at(prm.seed, 0xf17e, static_cast<uint64_t>(i));
    double u = rng.next_double() * w_total;
    const double* begin = cum.data();
    Eigen::Index idx = std::upper_bound(begin, begin + cum.size(), u) - begin;
    if (idx >= cum.size()) idx = cum.size() - 1;
    Eigen::VectorXd x = sprime.points.col(idx);
    Eigen::VectorXd w(N);
    for (int k = 0; k < N; ++k) w[k] = rng.next_normal();
    double nrm = w.norm();
    if (nrm < 1e-12) {
      w.setZero();
      w[0] = 1;
    } else {
      w /= nrm;
    }
    double r = prm.delta * std::pow(rng.next_double(), 1.0 / (1.0 + prm.alpha));
    x += r * w;
    double value = potential_eval(d, mu, point_from_ambient(G, x));
    if (std::isinf(value)) return 0.0;  // measure-zero coincidence with an atom
    return w_total * sphere * radial_norm * value;
  };

  const int64_t nh = prm.n_draws / 2;
  double sum_lo = parallel_block_sum(nh, term, prm.threads);
  double sum_hi =
      parallel_block_sum(prm.n_draws - nh, [&](int64_t i) { return term(i + nh); }, prm.threads);
  rep.half_estimate = sum_lo / static_cast<double>(nh);
  rep.estimate = (sum_lo + sum_hi) / static_cast<double>(prm.n_draws);
  rep.rel_drift =
      std::abs(rep.estimate - rep.half_estimate) / std::max(std::abs(rep.estimate), 1e-300);
  rep.converged = rep.rel_drift <= 0.02;

  if (prm.giraud_constant > 0) {
    // Collapsing the sphere and radial integrals into a ball integral gives
    //   int_B(p,delta) |y-x|^{2-N} |x-p|^{alpha+1-N} dx <= C |y-p|^{alpha+3-N}
    // per (S' point p, atom y); sum against both weight systems.
    double bound = 0;
    for (Eigen::Index i = 0; i < sprime.points.cols(); ++i) {
      Point p = point_from_ambient(G, sprime.points.col(i));
      for (const auto& [y, wy] : mu.atoms) {
        double sep = gauge_distance(d, p, y);
        if (sep == 0) continue;
        bound += sprime.weights[i] * wy * d.c_gamma * std::pow(sep, prm.alpha + 3.0 - N);
      }
    }
    rep.bound = prm.giraud_constant * bound;
    rep.bound_covers = rep.estimate <= rep.bound;
  }
  return rep;
}

}  // namespace carnot
