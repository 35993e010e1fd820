#include "carnot/giraud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "carnot/quadrature.hpp"

namespace carnot {

namespace {

// Quintic step: 0 below 0, 1 above 1, C^2 across both ends.
double s5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

// Chart weight in u = d_self/(d_self + d_other): identically 1 for u <= 0.4,
// identically 0 for u >= 0.6. chart_weight(u) + chart_weight(1-u) = 1.
double chart_weight(double u) { return 1.0 - s5((u - 0.4) / 0.2); }

// Core cutoff in t = d/r_core: 1 up to 1/2, 0 from 1 on.
double eta_core(double t) { return 1.0 - s5(2.0 * t - 1.0); }

// int_0^1 t^{alpha-1} eta_core(t) dt, the radial moment behind the core
// compensation sigma(S) r^alpha M(alpha).
double core_moment(double alpha) {
  double head = std::pow(0.5, alpha) / alpha;
  double tail = adaptive_simpson(
      [alpha](double t) { return std::pow(t, alpha - 1.0) * eta_core(t); }, 0.5, 1.0, 1e-13);
  return head + tail;
}

// Interval square of [a,b]; the minimum is 0 when the interval straddles zero.
void sq_interval(double a, double b, double& mn, double& mx) {
  double qa = a * a, qb = b * b;
  mx = std::max(qa, qb);
  mn = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(qa, qb);
}

double gauge_from_layers(bool euclid, double beta, double s1, double s2) {
  if (euclid) return std::sqrt(s1 + s2);
  return std::pow(s1 * s1 + beta * s2, 0.25);
}

// One singularity's chart in group-displacement coordinates z = c^{-1} o x.
// The self kernel factor is the plain gauge of z, so refinement near the own
// singularity stays axis-aligned; the region and the other factor are affine
// in z with second-layer shear rows.
struct Chart {
  const GaugeFn* g = nullptr;
  int n1 = 0, n2 = 0, dim = 0;
  bool euclid = false;
  double beta = 16.0;
  double vcoef = 0.0;  // second-layer gradient bound coefficient (sqrt(beta)/2 or 1)
  double q = 0.0;

  Eigen::VectorXd lo, hi;  // z bounding box, first layer then second

  // region: clip_off[k] + z2[k] + <shear_dom.row(k), z1> in [clip_lo[k], clip_hi[k]]
  Eigen::MatrixXd shear_dom;
  Eigen::VectorXd clip_off, clip_lo, clip_hi;

  // other factor: w1 = go1 + z1, w2[k] = go2[k] + z2[k] + <shear_oth.row(k), z1>
  Eigen::VectorXd go1, go2;
  Eigen::MatrixXd shear_oth;

  double exp_self = 0.0, exp_oth = 0.0;  // kernel exponents (a-Q / b-Q roles)
  bool partition = false;
  double sep = 0.0;  // gauge separation of the two singularities

  bool core_self = false;
  double r_self = 0.0;
  bool core_oth = false;
  double r_oth = 0.0;
};

struct CellBounds {
  double ds_min = 0, ds_max = 0, do_min = 0, do_max = 0;
  int clip = 0;  // 1 inside, 0 straddling, -1 outside
};

CellBounds cell_bounds(const Chart& ch, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  CellBounds cb;
  double s1_min = 0, s1_max = 0, o1_min = 0, o1_max = 0;
  for (int i = 0; i < ch.n1; ++i) {
    double mn, mx;
    sq_interval(lo[i], hi[i], mn, mx);
    s1_min += mn;
    s1_max += mx;
    sq_interval(ch.go1[i] + lo[i], ch.go1[i] + hi[i], mn, mx);
    o1_min += mn;
    o1_max += mx;
  }
  double s2_min = 0, s2_max = 0, o2_min = 0, o2_max = 0;
  cb.clip = 1;
  for (int k = 0; k < ch.n2; ++k) {
    const int a = ch.n1 + k;
    double mn, mx;
    sq_interval(lo[a], hi[a], mn, mx);
    s2_min += mn;
    s2_max += mx;

    double c1 = 0.5 * (lo[a] + hi[a]), h1 = 0.5 * (hi[a] - lo[a]);
    double wc = ch.go2[k] + c1, wh = h1;
    double dc = ch.clip_off[k] + c1, dh = h1;
    for (int j = 0; j < ch.n1; ++j) {
      double cj = 0.5 * (lo[j] + hi[j]), hj = 0.5 * (hi[j] - lo[j]);
      wc += ch.shear_oth(k, j) * cj;
      wh += std::abs(ch.shear_oth(k, j)) * hj;
      dc += ch.shear_dom(k, j) * cj;
      dh += std::abs(ch.shear_dom(k, j)) * hj;
    }
    sq_interval(wc - wh, wc + wh, mn, mx);
    o2_min += mn;
    o2_max += mx;

    if (dc - dh > ch.clip_hi[k] || dc + dh < ch.clip_lo[k]) cb.clip = -1;
    if (cb.clip == 1 && (dc - dh < ch.clip_lo[k] || dc + dh > ch.clip_hi[k])) cb.clip = 0;
  }
  cb.ds_min = gauge_from_layers(ch.euclid, ch.beta, s1_min, s2_min);
  cb.ds_max = gauge_from_layers(ch.euclid, ch.beta, s1_max, s2_max);
  cb.do_min = gauge_from_layers(ch.euclid, ch.beta, o1_min, o2_min);
  cb.do_max = gauge_from_layers(ch.euclid, ch.beta, o1_max, o2_max);
  return cb;
}

// Fraction of the cell inside the region. First-layer ranges never clip (the
// z1 box is the region's slice exactly); each second-layer constraint trims
// the z2_k range by an offset linear in z1, so the overlap is the z1 average
// of a product of interval lengths. Tensor 2-point Gauss in z1 handles the
// linear offsets; constraints kink the lengths, so this is approximate, but
// only boundary cells far from both singularities ever reach it.
double overlap_fraction(const Chart& ch, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double full2 = 1.0;
  for (int k = 0; k < ch.n2; ++k) full2 *= hi[ch.n1 + k] - lo[ch.n1 + k];
  if (full2 <= 0.0) return 0.0;

  auto slice = [&](const Eigen::VectorXd& z1) {
    double prod = 1.0;
    for (int k = 0; k < ch.n2; ++k) {
      const int a = ch.n1 + k;
      double off = ch.clip_off[k] + ch.shear_dom.row(k).head(ch.n1).dot(z1);
      double zlo = std::max(lo[a], ch.clip_lo[k] - off);
      double zhi = std::min(hi[a], ch.clip_hi[k] - off);
      if (zhi <= zlo) return 0.0;
      prod *= zhi - zlo;
    }
    return prod;
  };

  Eigen::VectorXd z1(ch.n1);
  if (ch.n1 > 12) {  // midpoint fallback; tensor nodes would explode
    for (int i = 0; i < ch.n1; ++i) z1[i] = 0.5 * (lo[i] + hi[i]);
    return slice(z1) / full2;
  }
  const double gp = 0.5773502691896258;  // 1/sqrt(3)
  double acc = 0.0;
  const int nodes = 1 << ch.n1;
  for (int m = 0; m < nodes; ++m) {
    for (int i = 0; i < ch.n1; ++i) {
      double c = 0.5 * (lo[i] + hi[i]), h = 0.5 * (hi[i] - lo[i]);
      z1[i] = c + ((m >> i) & 1 ? gp : -gp) * h;
    }
    acc += slice(z1);
  }
  return acc / (nodes * full2);
}

// Gauge ball {d <= r} around the chart origin or the other singularity,
// expressed as a z bounding box; used to certify that an analytic core fits
// inside the region.
bool core_ball_fits(const Chart& ch, bool self, double r) {
  Eigen::VectorXd c1(ch.n1), c2(ch.n2), b1(ch.n1), b2(ch.n2);
  if (self) {
    c1.setZero();
    c2.setZero();
    b1.setConstant(r);
    for (int k = 0; k < ch.n2; ++k)
      b2[k] = ch.euclid ? r : r * r / std::sqrt(ch.beta);
  } else {
    c1 = -ch.go1;
    c2 = -ch.go2;
    b1.setConstant(r);
    for (int k = 0; k < ch.n2; ++k) {
      double shear = (ch.g->group.jmaps[k] * ch.go1).norm();
      b2[k] = (ch.euclid ? r : r * r / std::sqrt(ch.beta)) + 0.5 * shear * r;
    }
  }
  for (int i = 0; i < ch.n1; ++i)
    if (c1[i] - b1[i] < ch.lo[i] || c1[i] + b1[i] > ch.hi[i]) return false;
  for (int k = 0; k < ch.n2; ++k) {
    const int a = ch.n1 + k;
    if (c2[k] - b2[k] < ch.lo[a] || c2[k] + b2[k] > ch.hi[a]) return false;
    double dc = ch.clip_off[k] + c2[k] + ch.shear_dom.row(k).head(ch.n1).dot(c1);
    double dh = b2[k];
    for (int j = 0; j < ch.n1; ++j) dh += std::abs(ch.shear_dom(k, j)) * b1[j];
    if (dc - dh < ch.clip_lo[k] || dc + dh > ch.clip_hi[k]) return false;
  }
  return true;
}

bool point_in_region(const Chart& ch, const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  for (int i = 0; i < ch.n1; ++i)
    if (z1[i] < ch.lo[i] || z1[i] > ch.hi[i]) return false;
  for (int k = 0; k < ch.n2; ++k) {
    double v = ch.clip_off[k] + z2[k] + ch.shear_dom.row(k).head(ch.n1).dot(z1);
    if (v < ch.clip_lo[k] || v > ch.clip_hi[k]) return false;
  }
  return true;
}

Chart build_chart(const GaugeFn& g, const GroupBox& omega, const Point& c, const Point& o,
                  double exp_self, double exp_oth, bool partition, bool enable_other_core,
                  double r_core_rel, double r_core_rel_oth = 0.0) {
  const auto& G = g.group;
  Chart ch;
  ch.g = &g;
  ch.n1 = G.n1();
  ch.n2 = G.n2();
  ch.dim = G.dim();
  ch.euclid = g.kind == GaugeKind::EuclideanNorm;
  ch.beta = g.beta;
  ch.vcoef = ch.euclid ? 1.0 : 0.5 * std::sqrt(g.beta);
  ch.q = G.Q();
  ch.exp_self = exp_self;
  ch.exp_oth = exp_oth;
  ch.partition = partition;

  Point m = left_difference(G, omega.base, c);
  Point go = left_difference(G, o, c);
  ch.sep = gauge(g, go);
  ch.go1 = go.first;
  ch.go2 = go.second;

  ch.lo.resize(ch.dim);
  ch.hi.resize(ch.dim);
  ch.shear_dom.setZero(ch.n2, ch.n1);
  ch.shear_oth.setZero(ch.n2, ch.n1);
  ch.clip_off.resize(ch.n2);
  ch.clip_lo.resize(ch.n2);
  ch.clip_hi.resize(ch.n2);

  for (int i = 0; i < ch.n1; ++i) {
    ch.lo[i] = omega.lo[i] - m.first[i];
    ch.hi[i] = omega.hi[i] - m.first[i];
  }
  for (int k = 0; k < ch.n2; ++k) {
    ch.shear_dom.row(k) = 0.5 * (G.jmaps[k] * m.first).transpose();
    ch.shear_oth.row(k) = 0.5 * (G.jmaps[k] * go.first).transpose();
    ch.clip_off[k] = m.second[k];
    ch.clip_lo[k] = omega.lo[ch.n1 + k];
    ch.clip_hi[k] = omega.hi[ch.n1 + k];
    // widen the z2 box by the largest shear offset so it covers the region
    double z1c_dot = 0.0, z1h_dot = 0.0;
    for (int j = 0; j < ch.n1; ++j) {
      double cj = 0.5 * (ch.lo[j] + ch.hi[j]), hj = 0.5 * (ch.hi[j] - ch.lo[j]);
      z1c_dot += ch.shear_dom(k, j) * cj;
      z1h_dot += std::abs(ch.shear_dom(k, j)) * hj;
    }
    double smax = std::abs(z1c_dot) + z1h_dot;
    ch.lo[ch.n1 + k] = ch.clip_lo[k] - m.second[k] - smax;
    ch.hi[ch.n1 + k] = ch.clip_hi[k] - m.second[k] + smax;
  }

  auto fit_core = [&](bool self, double& r_out) {
    const double rel = self || r_core_rel_oth <= 0.0 ? r_core_rel : r_core_rel_oth;
    double r = rel * ch.sep;
    const double r_min = 1e-8 * ch.sep;
    while (r > r_min && !core_ball_fits(ch, self, r)) r *= 0.5;
    if (core_ball_fits(ch, self, r)) {
      r_out = r;
      return true;
    }
    Eigen::VectorXd z1 = self ? Eigen::VectorXd::Zero(ch.n1) : Eigen::VectorXd(-ch.go1);
    Eigen::VectorXd z2 = self ? Eigen::VectorXd::Zero(ch.n2) : Eigen::VectorXd(-ch.go2);
    if (point_in_region(ch, z1, z2))
      throw AccuracyError("kernel quadrature: no analytic core fits around a singularity");
    return false;  // singularity outside the region; refinement bottoms out on its own
  };
  ch.core_self = fit_core(true, ch.r_self);
  if (enable_other_core) ch.core_oth = fit_core(false, ch.r_oth);
  return ch;
}

// Integrates the chart's weighted kernel over its region, midpoint rule on
// Whitney-refined cells plus the closed-form core masses. `bins`, when given,
// receives per-piece totals keyed by classify(d_self, d_other) at cell
// centers; core masses land in the piece containing their singularity.
double chart_integral(const Chart& ch, double theta, int64_t max_cells, int64_t& cells_used,
                      double* bins, int (*classify)(double, double, double)) {
  const double sigma_tot = sphere_measure_total(*ch.g);
  double total = 0.0;

  auto deposit = [&](double ds, double do_, double v) {
    total += v;
    if (bins) bins[classify(ds, do_, ch.sep)] += v;
  };

  if (ch.core_self) {
    double a_self = ch.exp_self + ch.q;
    double comp = std::pow(ch.sep, ch.exp_oth) * sigma_tot * std::pow(ch.r_self, a_self) *
                  core_moment(a_self);
    deposit(0.0, ch.sep, comp);
  }
  if (ch.core_oth) {
    double b_oth = ch.exp_oth + ch.q;
    double comp = std::pow(ch.sep, ch.exp_self) * sigma_tot * std::pow(ch.r_oth, b_oth) *
                  core_moment(b_oth);
    deposit(ch.sep, 0.0, comp);
  }

  const double es = std::abs(ch.exp_self), eo = std::abs(ch.exp_oth);
  const double tiny = 1e-12 * (1.0 + ch.sep);

  struct Cell {
    Eigen::VectorXd lo, hi;
  };
  std::vector<Cell> stack;
  stack.push_back({ch.lo, ch.hi});

  Eigen::VectorXd zc(ch.dim);
  while (!stack.empty()) {
    Cell cell = std::move(stack.back());
    stack.pop_back();
    if (++cells_used > max_cells)
      throw AccuracyError("kernel quadrature exceeded the cell budget");

    CellBounds cb = cell_bounds(ch, cell.lo, cell.hi);
    if (cb.clip < 0) continue;
    if (ch.partition && cb.ds_min >= 1.5 * cb.do_max) continue;  // other chart's half
    if (ch.core_self && cb.ds_max <= 0.5 * ch.r_self) continue;  // cutoff is exactly 1
    if (ch.core_oth && cb.do_max <= 0.5 * ch.r_oth) continue;

    const double Ds = std::max(cb.ds_min, ch.core_self ? 0.5 * ch.r_self : 0.0);
    const double Do = std::max(cb.do_min, ch.core_oth ? 0.5 * ch.r_oth : 0.0);

    double max_extent = 0.0;
    for (int i = 0; i < ch.dim; ++i) max_extent = std::max(max_extent, cell.hi[i] - cell.lo[i]);
    bool degenerate = Ds <= 0.0 || Do <= 0.0;
    if (degenerate && max_extent < tiny) continue;  // vanishing sliver at a bare singularity

    int split_axis = -1;
    double worst = 0.0;
    const bool transition =
        ch.partition && cb.ds_min < 1.6 * cb.do_max && cb.do_min < 1.6 * cb.ds_max;
    const bool near_core_s = ch.core_self && cb.ds_min < ch.r_self && cb.ds_max > 0.5 * ch.r_self;
    const bool near_core_o = ch.core_oth && cb.do_min < ch.r_oth && cb.do_max > 0.5 * ch.r_oth;
    for (int i = 0; i < ch.dim; ++i) {
      double hw = 0.5 * (cell.hi[i] - cell.lo[i]);
      double sens_s, sens_o;
      if (i < ch.n1) {
        double shear = ch.n2 ? ch.shear_oth.col(i).template lpNorm<1>() : 0.0;
        sens_s = degenerate ? 1.0 : es / Ds;
        sens_o = degenerate ? 1.0 : eo * (1.0 / Do + ch.vcoef * shear / (Do * Do));
      } else {
        sens_s = degenerate ? 1.0 : es * ch.vcoef / (Ds * Ds);
        sens_o = degenerate ? 1.0 : eo * ch.vcoef / (Do * Do);
      }
      double score = hw * (sens_s + sens_o);
      if (!degenerate) {
        // chi slope: |chi'| |grad u| <= 10/(ds+do) on the first layer and
        // 10 vcoef/(ds+do)^2 on the second, independent of the exponents
        if (transition)
          score += i < ch.n1 ? 10.0 * hw / (Ds + Do)
                             : 10.0 * hw * ch.vcoef / ((Ds + Do) * (Ds + Do));
        double gs = sens_s / std::max(es, 1.0), go_ = sens_o / std::max(eo, 1.0);
        if (near_core_s) score += 4.0 * hw * gs * Ds / ch.r_self;
        if (near_core_o) score += 4.0 * hw * go_ * Do / ch.r_oth;
      }
      if (score > worst) {
        worst = score;
        split_axis = i;
      }
    }

    if ((worst > theta || degenerate) && max_extent >= tiny) {
      Cell a{cell.lo, cell.hi}, b{cell.lo, cell.hi};
      double mid = 0.5 * (cell.lo[split_axis] + cell.hi[split_axis]);
      a.hi[split_axis] = mid;
      b.lo[split_axis] = mid;
      stack.push_back(std::move(a));
      stack.push_back(std::move(b));
      continue;
    }

    double vol = 1.0;
    for (int i = 0; i < ch.dim; ++i) vol *= cell.hi[i] - cell.lo[i];
    if (cb.clip == 0) {
      vol *= overlap_fraction(ch, cell.lo, cell.hi);
      if (vol <= 0.0) continue;
    }

    zc = 0.5 * (cell.lo + cell.hi);
    double s1 = zc.head(ch.n1).squaredNorm();
    double s2 = ch.n2 ? zc.tail(ch.n2).squaredNorm() : 0.0;
    double ds = gauge_from_layers(ch.euclid, ch.beta, s1, s2);
    double o1 = (ch.go1 + zc.head(ch.n1)).squaredNorm();
    double o2 = 0.0;
    for (int k = 0; k < ch.n2; ++k) {
      double w2 = ch.go2[k] + zc[ch.n1 + k] + ch.shear_oth.row(k).head(ch.n1).dot(zc.head(ch.n1));
      o2 += w2 * w2;
    }
    double don = gauge_from_layers(ch.euclid, ch.beta, o1, o2);
    if (ds <= 0.0 || don <= 0.0) continue;

    double f = std::pow(ds, ch.exp_self) * std::pow(don, ch.exp_oth);
    double w = ch.partition ? chart_weight(ds / (ds + don)) : 1.0;
    if (ch.core_self) w *= 1.0 - eta_core(ds / ch.r_self);
    if (ch.core_oth) w *= 1.0 - eta_core(don / ch.r_oth);
    if (w <= 0.0) continue;
    deposit(ds, don, f * w * vol);
  }
  return total;
}

int classify_noop(double, double, double) { return 0; }

// Proof regions keyed on the two center distances; sep = d(p), y at e.
int classify_annulus(double dx, double dpx, double sep) {
  if (dpx < 0.5 * sep) return 0;   // around p
  if (dpx >= 3.0 * sep) return 3;  // far field
  return dx < 0.5 * sep ? 1 : 2;   // middle shell, split around e
}

double two_chart_value(const InequalityCase& c, double theta, double r_core_rel,
                       int64_t max_cells, int64_t& cells_used) {
  const double q = c.gauge.group.Q();
  Chart at_y = build_chart(c.gauge, c.omega, c.y, c.p, c.a - q, c.b - q, true, false, r_core_rel);
  Chart at_p = build_chart(c.gauge, c.omega, c.p, c.y, c.b - q, c.a - q, true, false, r_core_rel);
  return chart_integral(at_y, theta, max_cells, cells_used, nullptr, classify_noop) +
         chart_integral(at_p, theta, max_cells, cells_used, nullptr, classify_noop);
}

}  // namespace

void check_group_box(const GroupStructure& G, const GroupBox& box, const char* who) {
  check_point(G, box.base, who);
  if (box.lo.size() != G.dim() || box.hi.size() != G.dim())
    throw StructuralError(std::string(who) + ": box corners need ambient dimension");
  for (int i = 0; i < G.dim(); ++i) {
    if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]))
      throw DomainError(std::string(who) + ": region must be bounded");
    if (!(box.hi[i] > box.lo[i])) throw DomainError(std::string(who) + ": empty region");
  }
}

GroupBox translate_box(const GroupStructure& G, const Point& g, const GroupBox& box) {
  check_group_box(G, box, "translate_box");
  return GroupBox{compose(G, g, box.base), box.lo, box.hi};
}

GroupBox dilate_box(const GroupStructure& G, double lambda, const GroupBox& box) {
  check_group_box(G, box, "dilate_box");
  GroupBox out{dilate(G, lambda, box.base), box.lo, box.hi};
  for (int i = 0; i < G.n1(); ++i) {
    out.lo[i] *= lambda;
    out.hi[i] *= lambda;
  }
  for (int k = 0; k < G.n2(); ++k) {
    out.lo[G.n1() + k] *= lambda * lambda;
    out.hi[G.n1() + k] *= lambda * lambda;
  }
  return out;
}

void validate_case(const InequalityCase& c) {
  const auto& G = c.gauge.group;
  check_group_box(G, c.omega, "validate_case");
  check_point(G, c.p, "validate_case");
  check_point(G, c.y, "validate_case");
  const double q = G.Q();
  if (!(c.a > 0.0 && c.a < q) || !(c.b > 0.0 && c.b < q))
    throw DomainError("validate_case: exponents must lie in (0, Q)");
  if (!(c.a + c.b < q)) throw DomainError("validate_case: need a + b < Q");
  if (gauge_distance(c.gauge, c.p, c.y) == 0.0)
    throw DomainError("validate_case: singularities coincide");
}

KernelResult kernel_integral_certified(const InequalityCase& c, const QuadratureSpec& spec) {
  validate_case(c);
  KernelResult res;
  res.coarse = two_chart_value(c, spec.theta, spec.r_core_rel, spec.max_cells, res.cells);
  res.value = two_chart_value(c, spec.theta * spec.refine_factor, 0.5 * spec.r_core_rel,
                              spec.max_cells, res.cells);
  res.rel_gap = std::abs(res.value - res.coarse) /
                std::max(std::abs(res.value), std::numeric_limits<double>::min());
  if (!(res.rel_gap <= spec.cert_tol))
    throw AccuracyError("kernel_integral: refinement levels disagree");
  return res;
}

double kernel_integral(const InequalityCase& c, const QuadratureSpec& spec) {
  return kernel_integral_certified(c, spec).value;
}

double giraud_ratio(const InequalityCase& c, const QuadratureSpec& spec) {
  double sep = gauge_distance(c.gauge, c.y, c.p);
  double q = c.gauge.group.Q();
  return kernel_integral(c, spec) * std::pow(sep, q - (c.a + c.b));
}

AnnulusReport annulus_decomposition(const InequalityCase& c, const QuadratureSpec& spec) {
  validate_case(c);
  if (gauge(c.gauge, c.y) != 0.0)
    throw DomainError("annulus_decomposition: y must sit at the identity");
  const double q = c.gauge.group.Q();

  auto level = [&](double theta, double rc, double rc_oth, double* bins, int64_t& cells) {
    std::fill(bins, bins + 4, 0.0);
    Chart ch =
        build_chart(c.gauge, c.omega, c.y, c.p, c.a - q, c.b - q, false, true, rc, rc_oth);
    return chart_integral(ch, theta, spec.max_cells, cells, bins, classify_annulus);
  };

  // The single chart is expensive around p: the shear couples z1 into the p
  // factor's second layer, so first-layer cells there shrink like the square
  // of the distance and the shell just outside the p core costs 1/r_core^2.
  // Hence the p core is 3x the self one and the certificate level shrinks it
  // by sqrt(2) only (the self core is shear-free and halves as usual). The
  // frozen-factor bias is quadratic in the core radius (the odd term cancels
  // over the symmetric ball), ~0.2 percent here, and the level gap probes it.
  const double rc_oth = 3.0 * spec.r_core_rel;
  double bins1[4], bins2[4];
  int64_t cells = 0;
  double sum1 = level(spec.theta, spec.r_core_rel, rc_oth, bins1, cells);
  double sum2 = level(spec.theta * spec.refine_factor, 0.5 * spec.r_core_rel,
                      rc_oth * M_SQRT1_2, bins2, cells);
  double gap = std::abs(sum2 - sum1) / std::max(sum2, std::numeric_limits<double>::min());
  if (!(gap <= spec.cert_tol))
    throw AccuracyError("annulus_decomposition: refinement levels disagree");

  AnnulusReport rep;
  rep.I = bins2[0];
  rep.II1 = bins2[1];
  rep.II2 = bins2[2];
  rep.III = bins2[3];
  rep.sum = sum2;
  rep.sep = gauge(c.gauge, c.p);
  rep.whole = kernel_integral(c, spec);
  rep.partition_err = std::abs(rep.sum - rep.whole) / rep.whole;
  rep.bound_scale = std::pow(rep.sep, c.a + c.b - q);
  rep.I_norm = rep.I / rep.bound_scale;
  rep.II1_norm = rep.II1 / rep.bound_scale;
  rep.II2_norm = rep.II2 / rep.bound_scale;
  rep.III_norm = rep.III / rep.bound_scale;

  Chart probe = build_chart(c.gauge, c.omega, c.y, c.p, c.a - q, c.b - q, false, false,
                            spec.r_core_rel);
  rep.cover_inner =
      core_ball_fits(probe, true, 0.5 * rep.sep) && core_ball_fits(probe, false, 0.5 * rep.sep);
  rep.cover_shell = core_ball_fits(probe, false, 3.0 * rep.sep);
  return rep;
}

ScanTable constant_scan(const GaugeFn& d, const std::vector<double>& a_grid,
                        const std::vector<double>& b_grid, int pair_samples, std::uint64_t seed,
                        const GroupBox& omega, double sep_min, double sep_max,
                        const QuadratureSpec& spec) {
  check_group_box(d.group, omega, "constant_scan");
  if (!(sep_min > 0.0) || !(sep_max >= sep_min))
    throw DomainError("constant_scan: need 0 < sep_min <= sep_max");
  ScanTable table;
  if (a_grid.empty() || b_grid.empty() || pair_samples <= 0) return table;

  const auto& G = d.group;
  auto gauge_direction = [&](SplitMix64& rng) {
    Point g = identity(G);
    for (int i = 0; i < G.n1(); ++i) g.first[i] = rng.next_normal();
    for (int k = 0; k < G.n2(); ++k) g.second[k] = rng.next_normal();
    double dg = gauge(d, g);
    if (dg < 1e-9) {
      g = identity(G);
      g.first[0] = 1.0;
      dg = 1.0;
    }
    return dilate(G, 1.0 / dg, g);
  };

  const size_t nb = b_grid.size(), np = static_cast<size_t>(pair_samples);
  for (size_t ia = 0; ia < a_grid.size(); ++ia) {
    for (size_t ib = 0; ib < nb; ++ib) {
      for (size_t j = 0; j < np; ++j) {
        double t = np == 1 ? 0.0 : double(j) / double(np - 1);
        double sep = sep_min * std::pow(sep_max / sep_min, t);
        uint64_t idx = (ia * nb + ib) * np + j;
        auto rng = stream_at(seed, 0x61aaUL, idx);
        Point y = dilate(G, 0.5 * sep, gauge_direction(rng));
        Point p = y;
        for (int tries = 0; tries < 64; ++tries) {
          p = dilate(G, 0.5 * sep, gauge_direction(rng));
          if (gauge_distance(d, p, y) >= 0.5 * sep) break;
        }
        ScanRow row;
        row.a = a_grid[ia];
        row.b = b_grid[ib];
        row.sep = gauge_distance(d, p, y);
        InequalityCase c{d, omega, a_grid[ia], b_grid[ib], p, y};
        try {
          row.ratio = giraud_ratio(c, spec);
          row.converged = true;
        } catch (const AccuracyError&) {
          row.ratio = std::numeric_limits<double>::quiet_NaN();
          row.converged = false;
        }
        table.rows.push_back(row);
      }
    }
  }
  return table;
}

LineFit ratio_slope(const ScanTable& table, double a, double b) {
  std::vector<double> xs, ys;
  for (const auto& r : table.rows) {
    if (r.a == a && r.b == b && r.converged && r.ratio > 0.0) {
      xs.push_back(std::log(r.sep));
      ys.push_back(std::log(r.ratio));
    }
  }
  if (xs.size() < 2) throw DomainError("ratio_slope: not enough converged rows");
  return fit_line(xs, ys);
}

}  // namespace carnot
