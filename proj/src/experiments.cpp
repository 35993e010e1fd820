#include "carnot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>

#include "carnot/fit.hpp"
#include "carnot/gauge.hpp"
#include "carnot/giraud.hpp"
#include "carnot/hausdorff.hpp"
#include "carnot/polarflow.hpp"
#include "carnot/potential.hpp"
#include "carnot/rng.hpp"

namespace carnot::experiments {

namespace {

using io::json;

constexpr const char* kSchemaName = "carnot-potential-summary/1";

struct Ctx {
  GroupStructure G;
  GaugeFn d;
  json params;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path config_dir;
  int threads = 0;
};

// ---------------------------------------------------------------------------
// param plumbing: every shape error is a StructuralError naming the key

double num_or(const json& p, const char* key, double dflt, const char* who) {
  if (!p.contains(key)) return dflt;
  const json& v = p.at(key);
  if (!v.is_number())
    throw StructuralError(std::string(who) + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t int_or(const json& p, const char* key, std::int64_t dflt, const char* who) {
  if (!p.contains(key)) return dflt;
  const json& v = p.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw StructuralError(std::string(who) + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool bool_or(const json& p, const char* key, bool dflt, const char* who) {
  if (!p.contains(key)) return dflt;
  const json& v = p.at(key);
  if (!v.is_boolean())
    throw StructuralError(std::string(who) + ": '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> number_list(const json& v, const char* key, const char* who) {
  if (!v.is_array())
    throw StructuralError(std::string(who) + ": '" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number())
      throw StructuralError(std::string(who) + ": '" + key + "' must be a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<double> list_or(const json& p, const char* key, std::vector<double> dflt,
                            const char* who) {
  if (!p.contains(key)) return dflt;
  return number_list(p.at(key), key, who);
}

std::vector<double> req_list(const json& p, const char* key, const char* who) {
  if (!p.contains(key))
    throw StructuralError(std::string(who) + ": missing required key '" + key + "'");
  return number_list(p.at(key), key, who);
}

const json& req_obj(const json& p, const char* key, const char* who) {
  if (!p.contains(key))
    throw StructuralError(std::string(who) + ": missing required key '" + key + "'");
  const json& v = p.at(key);
  if (!v.is_object())
    throw StructuralError(std::string(who) + ": '" + key + "' must be an object");
  return v;
}

Eigen::VectorXd vec_of(const std::vector<double>& xs) {
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// ---------------------------------------------------------------------------
// gate bookkeeping: every gate lands in results.gates; any false one turns
// the run into an accuracy failure after the results are complete

struct Gates {
  json* results;
  std::vector<std::string> failed;

  void check(const std::string& name, bool ok) {
    (*results)["gates"][name] = ok;
    if (!ok) failed.push_back(name);
  }

  void finish() const {
    if (failed.empty()) return;
    std::string msg = "accuracy gates failed:";
    for (const std::string& f : failed) msg += " " + f;
    throw AccuracyError(msg);
  }
};

void add_artifact(json& summary, const std::string& name) {
  summary["artifacts"].push_back(name);
}

double ambient_gap(const Point& a, const Point& b) {
  return (a.ambient() - b.ambient()).lpNorm<Eigen::Infinity>();
}

Point draw_point(const GroupStructure& G, std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t i, double r1, double r2) {
  auto rng = stream_at(seed, stream, i);
  Point p = identity(G);
  for (int k = 0; k < G.n1(); ++k) p.first[k] = rng.next_in(-r1, r1);
  for (int k = 0; k < G.n2(); ++k) p.second[k] = rng.next_in(-r2, r2);
  return p;
}

// ---------------------------------------------------------------------------
// group-check: the algebra laws on random triples

void run_group_check(Ctx& c, json& summary) {
  io::require_keys(c.params, {"cases", "tol", "htype_tol"}, "group-check params");
  const std::int64_t cases = int_or(c.params, "cases", 10000, "group-check");
  const double tol = num_or(c.params, "tol", 1e-12, "group-check");
  const double htype_tol = num_or(c.params, "htype_tol", 1e-10, "group-check");
  if (cases < 1) throw DomainError("group-check: cases must be >= 1");

  const GroupStructure& G = c.G;
  double assoc = 0, ident = 0, inv = 0, dil = 0, htr = 0;
  for (std::int64_t i = 0; i < cases; ++i) {
    const auto u = static_cast<std::uint64_t>(i);
    Point a = draw_point(G, c.seed, 0x9c01, 3 * u, 2.0, 2.0);
    Point b = draw_point(G, c.seed, 0x9c01, 3 * u + 1, 2.0, 2.0);
    Point cc = draw_point(G, c.seed, 0x9c01, 3 * u + 2, 2.0, 2.0);
    auto aux = stream_at(c.seed, 0x9c02, u);
    const double lam = aux.next_in(0.5, 2.0);

    assoc = std::max(assoc, ambient_gap(compose(G, compose(G, a, b), cc),
                                        compose(G, a, compose(G, b, cc))));
    ident = std::max({ident, ambient_gap(compose(G, a, identity(G)), a),
                      ambient_gap(compose(G, identity(G), a), a)});
    inv = std::max({inv, ambient_gap(compose(G, a, inverse(G, a)), identity(G)),
                    ambient_gap(compose(G, inverse(G, a), a), identity(G))});
    dil = std::max(dil, ambient_gap(dilate(G, lam, compose(G, a, b)),
                                    compose(G, dilate(G, lam, a), dilate(G, lam, b))));
    if (G.h_type && G.n2() > 0) {
      Eigen::VectorXd z(G.n2());
      for (int k = 0; k < G.n2(); ++k) z[k] = aux.next_normal();
      if (z.norm() > 0) z.normalize();
      htr = std::max(htr, h_type_residual(G, z));
    }
  }

  json& r = summary["results"];
  r["cases"] = cases;
  r["max_associativity_err"] = assoc;
  r["max_identity_err"] = ident;
  r["max_inverse_err"] = inv;
  r["max_dilation_err"] = dil;
  r["h_type"] = G.h_type;
  r["h_type_defect"] = G.h_type_defect;
  r["max_h_type_residual"] = htr;

  std::vector<std::vector<std::string>> rows;
  auto push = [&](const char* q, double v) { rows.push_back({q, io::format_g17(v)}); };
  push("max_associativity_err", assoc);
  push("max_identity_err", ident);
  push("max_inverse_err", inv);
  push("max_dilation_err", dil);
  push("h_type_defect", G.h_type_defect);
  push("max_h_type_residual", htr);
  io::write_csv_text(c.out / "checks.csv", {"quantity", "value"}, rows);
  add_artifact(summary, "checks.csv");

  Gates gates{&r, {}};
  gates.check("associativity", assoc <= tol);
  gates.check("identity", ident <= tol);
  gates.check("inverse", inv <= tol);
  gates.check("dilation_automorphism", dil <= tol);
  if (G.h_type && G.n2() > 0)
    gates.check("h_type", G.h_type_defect <= htype_tol && htr <= htype_tol);
  gates.finish();
}

// ---------------------------------------------------------------------------
// gauge-check: homogeneity, symmetry, and the kernel stencil residual order

void run_gauge_check(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"cases", "tol", "residual_h", "residual_points", "slope_band"},
                   "gauge-check params");
  const std::int64_t cases = int_or(c.params, "cases", 2000, "gauge-check");
  const double tol = num_or(c.params, "tol", 1e-12, "gauge-check");
  const std::vector<double> hs =
      list_or(c.params, "residual_h", {0.032, 0.016, 0.008, 0.004, 0.002}, "gauge-check");
  const int n_probes =
      static_cast<int>(int_or(c.params, "residual_points", 16, "gauge-check"));
  const double band = num_or(c.params, "slope_band", 0.2, "gauge-check");
  if (cases < 1) throw DomainError("gauge-check: cases must be >= 1");
  if (hs.size() < 2) throw DomainError("gauge-check: need >= 2 stencil steps");
  for (double h : hs)
    if (!(h > 0)) throw DomainError("gauge-check: stencil steps must be positive");
  if (n_probes < 4) throw DomainError("gauge-check: need >= 4 residual points");

  const GroupStructure& G = c.G;
  const GaugeFn& d = c.d;
  double homog = 0, symm = 0;
  for (std::int64_t i = 0; i < cases; ++i) {
    const auto u = static_cast<std::uint64_t>(i);
    Point x = draw_point(G, c.seed, 0x9a01, u, 2.0, 2.0);
    const double dx = gauge(d, x);
    if (dx == 0) continue;
    auto aux = stream_at(c.seed, 0x9a02, u);
    const double lam = aux.next_in(0.25, 4.0);
    homog = std::max(homog, std::abs(gauge(d, dilate(G, lam, x)) - lam * dx) / (lam * dx));
    symm = std::max(symm, std::abs(gauge(d, inverse(G, x)) - dx) / dx);
  }

  // Residual probes live in the annulus 0.5 < d < 1.5, away from the
  // characteristic set where the horizontal stencil degenerates.
  std::vector<Point> probes;
  for (std::uint64_t i = 0; static_cast<int>(probes.size()) < n_probes && i < 200u * n_probes;
       ++i) {
    Point x = draw_point(G, c.seed, 0x9a03, i, 1.0, 0.5);
    const double dx = gauge(d, x);
    if (dx < 0.5 || dx > 1.5) continue;
    if (x.first.norm() < 0.2 * dx) continue;
    probes.push_back(x);
  }
  if (static_cast<int>(probes.size()) < n_probes)
    throw AccuracyError("gauge-check: residual probe sampling failed");

  std::vector<double> log_h, log_res;
  std::vector<std::vector<double>> rows;
  for (double h : hs) {
    double worst = 0;
    for (const Point& x : probes) worst = std::max(worst, scaled_gamma_residual(d, x, h));
    log_h.push_back(std::log(h));
    log_res.push_back(std::log(worst));
    rows.push_back({h, worst});
  }
  const LineFit fit = fit_line(log_h, log_res);

  json& r = summary["results"];
  r["cases"] = cases;
  r["max_homogeneity_err"] = homog;
  r["max_symmetry_err"] = symm;
  r["residual_slope"] = fit.slope;
  r["residual_points"] = static_cast<int>(probes.size());
  io::write_csv(c.out / "residual.csv", {"h", "max_scaled_residual"}, rows);
  add_artifact(summary, "residual.csv");

  Gates gates{&r, {}};
  gates.check("homogeneity", homog <= tol);
  gates.check("symmetry", symm <= tol);
  gates.check("residual_order", std::abs(fit.slope - 2.0) <= band);
  gates.finish();
}

// ---------------------------------------------------------------------------
// calibrate: quadrature constant against the closed form

void run_calibrate(Ctx& c, json& summary) {
  io::require_keys(c.params, {"bump", "grid", "closed_form_tol"}, "calibrate params");
  BumpSpec bump;
  if (c.params.contains("bump")) {
    const json& b = req_obj(c.params, "bump", "calibrate");
    io::require_keys(b, {"radius", "plateau"}, "calibrate bump");
    bump.radius = num_or(b, "radius", bump.radius, "calibrate");
    bump.plateau = num_or(b, "plateau", bump.plateau, "calibrate");
  }
  CalibrationGrid grid;
  if (c.params.contains("grid")) {
    const json& g = req_obj(c.params, "grid", "calibrate");
    io::require_keys(g, {"cells", "stencil_h_rel"}, "calibrate grid");
    grid.cells = static_cast<int>(int_or(g, "cells", 0, "calibrate"));
    grid.stencil_h_rel = num_or(g, "stencil_h_rel", grid.stencil_h_rel, "calibrate");
  }
  grid.threads = c.threads;
  const double tol = num_or(c.params, "closed_form_tol", 1e-3, "calibrate");

  GaugeFn g = c.d;
  const CalibrationReport rep = calibrate_constant(g, bump, grid);

  json& r = summary["results"];
  r["c_gamma"] = rep.c_gamma;
  r["coarse"] = rep.coarse;
  r["rel_gap"] = rep.rel_gap;

  std::vector<std::vector<std::string>> rows{
      {"c_gamma", io::format_g17(rep.c_gamma)},
      {"coarse", io::format_g17(rep.coarse)},
      {"rel_gap", io::format_g17(rep.rel_gap)},
  };

  Gates gates{&r, {}};
  bool have_cf = false;
  double cf = 0;
  try {
    cf = gamma_constant_closed_form(g);
    have_cf = true;
  } catch (const DomainError&) {
    // no closed form for this gauge; the quadrature value stands alone
  }
  if (have_cf) {
    const double gap = std::abs(rep.c_gamma - cf);
    r["closed_form"] = cf;
    r["closed_form_gap"] = gap;
    rows.push_back({"closed_form", io::format_g17(cf)});
    rows.push_back({"closed_form_gap", io::format_g17(gap)});
    gates.check("closed_form", gap <= tol);
  } else {
    r["closed_form"] = nullptr;
    r["closed_form_gap"] = nullptr;
  }
  io::write_csv_text(c.out / "calibration.csv", {"quantity", "value"}, rows);
  add_artifact(summary, "calibration.csv");
  gates.finish();
}

// ---------------------------------------------------------------------------
// flow-check: gauge linearity, constant speed, semigroup, jacobian

void run_flow_check(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"points", "s_values", "semigroup_pair", "jacobian_s", "trace_s",
                    "linearity_tol", "speed_tol", "semigroup_tol", "jacobian_tol"},
                   "flow-check params");
  const int n_points = static_cast<int>(int_or(c.params, "points", 12, "flow-check"));
  const std::vector<double> s_values =
      list_or(c.params, "s_values", {0.3, 2.5}, "flow-check");
  const std::vector<double> pair =
      list_or(c.params, "semigroup_pair", {1.7, 0.6}, "flow-check");
  const double jac_s = num_or(c.params, "jacobian_s", 2.0, "flow-check");
  const double trace_s = num_or(c.params, "trace_s", 3.0, "flow-check");
  const double lin_tol = num_or(c.params, "linearity_tol", 1e-8, "flow-check");
  const double speed_tol = num_or(c.params, "speed_tol", 1e-7, "flow-check");
  const double semi_tol = num_or(c.params, "semigroup_tol", 1e-7, "flow-check");
  const double jac_tol = num_or(c.params, "jacobian_tol", 1e-3, "flow-check");
  if (n_points < 1) throw DomainError("flow-check: points must be >= 1");
  if (pair.size() != 2) throw DomainError("flow-check: semigroup_pair needs two factors");
  for (double s : s_values)
    if (!(s > 0)) throw DomainError("flow-check: flow targets must be positive");

  const GroupStructure& G = c.G;
  const GaugeFn& d = c.d;
  double lin = 0, speed = 0, semi = 0, jac = 0;
  int accepted = 0;
  std::vector<std::vector<double>> trace;
  for (std::uint64_t i = 0; accepted < n_points && i < 100u * static_cast<std::uint64_t>(n_points);
       ++i) {
    Point g = draw_point(G, c.seed, 0xf10c, i, 1.5, 1.5);
    if (in_characteristic_band(d, g, 1e-3)) continue;
    ++accepted;
    const double dg = gauge(d, g);
    const double base = horizontal_gradient_norm(d, g);

    for (double s : s_values) {
      FlowState st = flow(d, g, s);
      lin = std::max({lin, std::abs(st.gauge_value - s * dg) / (s * dg),
                      std::abs(gauge(d, st.point) - s * dg) / (s * dg)});
    }

    FlowState two = flow(d, flow(d, g, pair[0]).point, pair[1]);
    FlowState once = flow(d, g, pair[0] * pair[1]);
    semi = std::max(semi, ambient_gap(two.point, once.point) /
                              (1.0 + once.point.ambient().norm()));

    const bool record = trace.empty();
    flow(d, g, trace_s, {}, [&](double s, const Point& p) {
      speed = std::max(speed, std::abs(horizontal_gradient_norm(d, p) - base) / base);
      if (record) {
        std::vector<double> row{s};
        for (int k = 0; k < G.dim(); ++k) row.push_back(p.ambient()[k]);
        row.push_back(gauge(d, p));
        trace.push_back(std::move(row));
      }
    });

    jac = std::max(jac, std::abs(jacobian_det_check(d, g, jac_s) - 1.0));
  }
  if (accepted < n_points)
    throw AccuracyError("flow-check: could not seed enough non-characteristic points");

  json& r = summary["results"];
  r["points"] = accepted;
  r["max_gauge_linearity_err"] = lin;
  r["max_speed_drift"] = speed;
  r["max_semigroup_gap"] = semi;
  r["max_jacobian_err"] = jac;

  std::vector<std::string> header{"s"};
  for (int k = 0; k < G.dim(); ++k) header.push_back("x" + std::to_string(k));
  header.push_back("gauge");
  io::write_csv(c.out / "trace.csv", header, trace);
  add_artifact(summary, "trace.csv");

  Gates gates{&r, {}};
  gates.check("gauge_linearity", lin <= lin_tol);
  gates.check("constant_speed", speed <= speed_tol);
  gates.check("semigroup", semi <= semi_tol);
  gates.check("jacobian_det", jac <= jac_tol);
  gates.finish();
}

// ---------------------------------------------------------------------------
// polar-check: the polar integration formula plus the sphere total

void run_polar_check(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"functions", "bump_radius", "support_radius", "annulus_a", "annulus_b",
                    "sigma_draws", "lhs_cells", "lhs_mc", "s_floor", "tol", "sphere_tol",
                    "sigma_csv_rows"},
                   "polar-check params");
  std::vector<std::string> fns{"radial-bump", "tilted-bump"};
  if (c.params.contains("functions")) {
    fns.clear();
    const json& v = c.params.at("functions");
    if (!v.is_array())
      throw StructuralError("polar-check: 'functions' must be a list of names");
    for (const json& f : v) {
      if (!f.is_string())
        throw StructuralError("polar-check: 'functions' must be a list of names");
      fns.push_back(f.get<std::string>());
    }
    if (fns.empty()) throw DomainError("polar-check: need at least one test function");
  }

  BumpSpec bump;
  bump.radius = num_or(c.params, "bump_radius", 2.0, "polar-check");
  PolarCheckOptions opt;
  opt.support_radius = num_or(c.params, "support_radius", bump.radius, "polar-check");
  opt.annulus_a = num_or(c.params, "annulus_a", 1.0, "polar-check");
  opt.annulus_b = num_or(c.params, "annulus_b", 2.0, "polar-check");
  opt.sigma_draws = int_or(c.params, "sigma_draws", 120000, "polar-check");
  opt.lhs_cells = static_cast<int>(int_or(c.params, "lhs_cells", 48, "polar-check"));
  opt.lhs_mc = int_or(c.params, "lhs_mc", 0, "polar-check");
  opt.s_floor = num_or(c.params, "s_floor", opt.s_floor, "polar-check");
  opt.tol = num_or(c.params, "tol", 0.02, "polar-check");
  opt.seed = c.seed;
  opt.threads = c.threads;
  const double sphere_tol = num_or(c.params, "sphere_tol", 0.01, "polar-check");
  const std::int64_t csv_rows = int_or(c.params, "sigma_csv_rows", 5000, "polar-check");

  const GaugeFn& d = c.d;
  auto make_fn = [&](const std::string& name) -> std::function<double(const Point&)> {
    if (name == "radial-bump")
      return [&](const Point& p) { return bump_profile(bump, gauge(d, p) / bump.radius); };
    if (name == "tilted-bump")
      return [&](const Point& p) {
        return bump_profile(bump, gauge(d, p) / bump.radius) * (1.0 + 0.5 * p.first[0]);
      };
    throw StructuralError("polar-check: unknown test function '" + name + "'");
  };

  json& r = summary["results"];
  Gates gates{&r, {}};
  r["functions"] = json::object();
  for (const std::string& name : fns) {
    const PolarCheckReport rep = polar_formula_check(d, make_fn(name), opt);
    json entry;
    entry["lhs"] = rep.lhs;
    entry["rhs"] = rep.rhs;
    entry["rel_err"] = rep.rel_err;
    entry["lhs_half"] = rep.lhs_half;
    entry["rhs_half"] = rep.rhs_half;
    r["functions"][name] = std::move(entry);
    gates.check("rel_err(" + name + ")", rep.rel_err <= opt.tol);
  }

  const SigmaSamples ss =
      sigma_sample(d, opt.annulus_a, opt.annulus_b, opt.sigma_draws, c.seed, opt.flow, c.threads);
  const double closed = sphere_measure_total(d);
  const double sigma_rel = std::abs(ss.sigma_total - closed) / closed;
  r["sigma_total"] = ss.sigma_total;
  r["sigma_closed_form"] = closed;
  r["sigma_rel_err"] = sigma_rel;
  r["sigma_accepted"] = ss.n_accepted;
  r["acceptance_rate"] = ss.acceptance_rate;

  std::vector<std::string> header;
  for (int k = 0; k < c.G.dim(); ++k) header.push_back("x" + std::to_string(k));
  header.push_back("weight");
  std::vector<std::vector<double>> rows;
  const std::int64_t limit =
      std::min<std::int64_t>(csv_rows, static_cast<std::int64_t>(ss.points.size()));
  for (std::int64_t i = 0; i < limit; ++i) {
    std::vector<double> row;
    for (int k = 0; k < c.G.dim(); ++k) row.push_back(ss.points[i].ambient()[k]);
    row.push_back(ss.weight);
    rows.push_back(std::move(row));
  }
  io::write_csv(c.out / "sigma.csv", header, rows);
  add_artifact(summary, "sigma.csv");

  gates.check("sphere_total", sigma_rel <= sphere_tol);
  gates.finish();
}

// ---------------------------------------------------------------------------
// giraud-scan: separation-normalized kernel ratios and the annulus split

GroupBox centered_box(const GroupStructure& G, double r1, double r2) {
  GroupBox box;
  box.base = identity(G);
  box.lo = Eigen::VectorXd(G.dim());
  box.hi = Eigen::VectorXd(G.dim());
  box.lo.head(G.n1()).setConstant(-r1);
  box.hi.head(G.n1()).setConstant(r1);
  box.lo.tail(G.n2()).setConstant(-r2);
  box.hi.tail(G.n2()).setConstant(r2);
  return box;
}

Point first_layer_point(const GroupStructure& G, double t) {
  Point p = identity(G);
  p.first[0] = t;
  return p;
}

void run_giraud_scan(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"a_grid", "b_grid", "pair_samples", "sep_min", "sep_max", "omega",
                    "slope_band", "annulus_seps", "annulus_tol", "quad"},
                   "giraud-scan params");
  const std::vector<double> a_grid = req_list(c.params, "a_grid", "giraud-scan");
  const std::vector<double> b_grid = req_list(c.params, "b_grid", "giraud-scan");
  const int pair_samples =
      static_cast<int>(int_or(c.params, "pair_samples", 16, "giraud-scan"));
  const double sep_min = num_or(c.params, "sep_min", 1e-3, "giraud-scan");
  const double sep_max = num_or(c.params, "sep_max", 1.0, "giraud-scan");
  double r1 = 4.0, r2 = 16.0;
  if (c.params.contains("omega")) {
    const json& o = req_obj(c.params, "omega", "giraud-scan");
    io::require_keys(o, {"r1", "r2"}, "giraud-scan omega");
    r1 = num_or(o, "r1", r1, "giraud-scan");
    r2 = num_or(o, "r2", r2, "giraud-scan");
  }
  const double band = num_or(c.params, "slope_band", 0.1, "giraud-scan");
  const std::vector<double> ann_seps = list_or(c.params, "annulus_seps", {}, "giraud-scan");
  const double ann_tol = num_or(c.params, "annulus_tol", 0.01, "giraud-scan");
  QuadratureSpec spec;
  if (c.params.contains("quad")) {
    const json& q = req_obj(c.params, "quad", "giraud-scan");
    io::require_keys(q, {"theta", "r_core_rel", "cert_tol", "refine_factor", "max_cells"},
                     "giraud-scan quad");
    spec.theta = num_or(q, "theta", spec.theta, "giraud-scan");
    spec.r_core_rel = num_or(q, "r_core_rel", spec.r_core_rel, "giraud-scan");
    spec.cert_tol = num_or(q, "cert_tol", spec.cert_tol, "giraud-scan");
    spec.refine_factor = num_or(q, "refine_factor", spec.refine_factor, "giraud-scan");
    spec.max_cells = int_or(q, "max_cells", spec.max_cells, "giraud-scan");
  }
  if (a_grid.empty() || b_grid.empty())
    throw DomainError("giraud-scan: exponent grids must be nonempty");

  const GroupStructure& G = c.G;
  const GaugeFn& d = c.d;
  const GroupBox omega = centered_box(G, r1, r2);

  // Exponent and region constraints surface before any quadrature runs.
  for (double a : a_grid)
    for (double b : b_grid) {
      InequalityCase probe{d, omega, a, b, first_layer_point(G, std::min(1.0, 0.5 * r1)),
                           identity(G)};
      validate_case(probe);
    }

  const ScanTable table =
      constant_scan(d, a_grid, b_grid, pair_samples, c.seed, omega, sep_min, sep_max, spec);

  std::vector<std::vector<std::string>> rows;
  for (const ScanRow& row : table.rows)
    rows.push_back({to_string(G.kind), io::format_g17(row.a), io::format_g17(row.b),
                    io::format_g17(row.sep), io::format_g17(row.ratio),
                    row.converged ? "1" : "0"});
  io::write_csv_text(c.out / "scan.csv", {"group", "a", "b", "sep", "ratio", "converged"}, rows);
  add_artifact(summary, "scan.csv");

  json& r = summary["results"];
  Gates gates{&r, {}};
  r["cells"] = json::array();
  for (double a : a_grid)
    for (double b : b_grid) {
      int n_rows = 0, n_conv = 0;
      std::vector<double> xs, ys;
      for (const ScanRow& row : table.rows) {
        if (row.a != a || row.b != b) continue;
        ++n_rows;
        if (!row.converged) continue;
        ++n_conv;
        xs.push_back(std::log(row.sep));
        ys.push_back(std::log(row.ratio));
      }
      json cell;
      cell["a"] = a;
      cell["b"] = b;
      cell["rows"] = n_rows;
      cell["converged"] = n_conv;
      const std::string tag = "(" + io::format_g17(a) + "," + io::format_g17(b) + ")";
      if (n_conv >= 2) {
        const LineFit fit = ratio_slope(table, a, b);
        double my = 0;
        for (double y : ys) my += y;
        my /= static_cast<double>(ys.size());
        double rss = 0, tss = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double pred = fit.intercept + fit.slope * xs[i];
          rss += (ys[i] - pred) * (ys[i] - pred);
          tss += (ys[i] - my) * (ys[i] - my);
        }
        cell["slope"] = fit.slope;
        cell["ci"] = fit.ci_halfwidth;
        cell["r2"] = tss > 0 ? 1.0 - rss / tss : 1.0;
        gates.check("slope" + tag, std::abs(fit.slope) <= band);
      } else {
        cell["slope"] = nullptr;
        cell["ci"] = nullptr;
        cell["r2"] = nullptr;
        gates.check("slope" + tag, false);
      }
      gates.check("converged" + tag, n_rows > 0 && n_conv == n_rows);
      r["cells"].push_back(std::move(cell));
    }

  if (!ann_seps.empty()) {
    r["annulus"] = json::array();
    std::vector<std::vector<double>> arows;
    for (double sep : ann_seps) {
      InequalityCase ac{d, omega, a_grid.front(), b_grid.front(), first_layer_point(G, sep),
                        identity(G)};
      validate_case(ac);
      const AnnulusReport rep = annulus_decomposition(ac, spec);
      json entry;
      entry["sep"] = rep.sep;
      entry["I"] = rep.I;
      entry["II1"] = rep.II1;
      entry["II2"] = rep.II2;
      entry["III"] = rep.III;
      entry["sum"] = rep.sum;
      entry["whole"] = rep.whole;
      entry["partition_err"] = rep.partition_err;
      entry["cover_inner"] = rep.cover_inner;
      entry["cover_shell"] = rep.cover_shell;
      r["annulus"].push_back(std::move(entry));
      arows.push_back({rep.sep, rep.I, rep.II1, rep.II2, rep.III, rep.sum, rep.whole,
                       rep.partition_err});
      const std::string tag = "(" + io::format_g17(sep) + ")";
      gates.check("annulus_cover" + tag, rep.cover_inner && rep.cover_shell);
      gates.check("annulus_partition" + tag, rep.partition_err <= ann_tol);
    }
    io::write_csv(c.out / "annulus.csv",
                  {"sep", "I", "II1", "II2", "III", "sum", "whole", "partition_err"}, arows);
    add_artifact(summary, "annulus.csv");
  }
  gates.finish();
}

// ---------------------------------------------------------------------------
// boxcount: covering counts for built-in or CSV point sets

Eigen::MatrixXd read_points_csv(const std::filesystem::path& path, int dim) {
  std::ifstream in(path);
  if (!in) throw StructuralError("boxcount: cannot read " + path.string());
  std::vector<double> vals;
  std::string line;
  bool maybe_header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    bool numeric = true;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? comma : comma - start);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      if (maybe_header) {
        maybe_header = false;
        continue;
      }
      throw StructuralError("boxcount: non-numeric row in " + path.string());
    }
    maybe_header = false;
    if (static_cast<int>(row.size()) != dim)
      throw StructuralError("boxcount: csv rows must have one column per ambient coordinate");
    vals.insert(vals.end(), row.begin(), row.end());
  }
  const std::int64_t n = static_cast<std::int64_t>(vals.size()) / dim;
  Eigen::MatrixXd pts(dim, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) pts(k, i) = vals[static_cast<std::size_t>(i) * dim + k];
  return pts;
}

void run_boxcount(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"set", "n_points", "scales", "csv_path", "write_samples", "samples_cap",
                    "expect"},
                   "boxcount params");
  if (!c.params.contains("set") || !c.params.at("set").is_string())
    throw StructuralError("boxcount: 'set' must name a point set");
  const std::string set = c.params.at("set").get<std::string>();
  const std::vector<double> scales = req_list(c.params, "scales", "boxcount");
  const bool write_samples = bool_or(c.params, "write_samples", false, "boxcount");
  const std::int64_t cap = int_or(c.params, "samples_cap", 100000, "boxcount");

  const GroupStructure& G = c.G;
  const GaugeFn& d = c.d;
  CoverReport cover;
  PointFiller filler;
  std::int64_t n = 0;

  if (set == "csv") {
    if (!c.params.contains("csv_path") || !c.params.at("csv_path").is_string())
      throw StructuralError("boxcount: set 'csv' needs a 'csv_path'");
    const Eigen::MatrixXd pts =
        read_points_csv(c.config_dir / c.params.at("csv_path").get<std::string>(), G.dim());
    n = pts.cols();
    cover = box_count(d, pts, scales, c.threads);
    if (write_samples) {
      std::vector<std::string> header;
      for (int k = 0; k < G.dim(); ++k) header.push_back("x" + std::to_string(k));
      std::vector<std::vector<double>> rows;
      for (std::int64_t i = 0; i < std::min(n, cap); ++i) {
        std::vector<double> row;
        for (int k = 0; k < G.dim(); ++k) row.push_back(pts(k, i));
        rows.push_back(std::move(row));
      }
      io::write_csv(c.out / "samples.csv", header, rows);
      add_artifact(summary, "samples.csv");
    }
  } else {
    n = int_or(c.params, "n_points", 0, "boxcount");
    if (n < 1) throw DomainError("boxcount: n_points must be >= 1");
    const std::uint64_t seed = c.seed;
    if (set == "horizontal-segment") {
      filler = [seed](std::int64_t i, Eigen::VectorXd& out) {
        out.setZero();
        out[0] = stream_at(seed, 0xb05e, static_cast<std::uint64_t>(i)).next_double();
      };
    } else if (set == "vertical-segment") {
      if (G.n2() < 1) throw DomainError("boxcount: vertical-segment needs a second layer");
      filler = [&G, seed](std::int64_t i, Eigen::VectorXd& out) {
        out.setZero();
        out[G.n1()] = stream_at(seed, 0xb05e, static_cast<std::uint64_t>(i)).next_double();
      };
    } else if (set == "gauge-ball") {
      // Rejection from the smallest covering box; the per-index stream keeps
      // the accepted point a pure function of i.
      const double s2 = G.n2() > 0 ? 1.0 / std::sqrt(d.beta) : 0.0;
      filler = [&G, &d, seed, s2](std::int64_t i, Eigen::VectorXd& out) {
        auto rng = stream_at(seed, 0xba11, static_cast<std::uint64_t>(i));
        Point p = identity(G);
        do {
          for (int k = 0; k < G.n1(); ++k) p.first[k] = rng.next_in(-1.0, 1.0);
          for (int k = 0; k < G.n2(); ++k) p.second[k] = rng.next_in(-s2, s2);
        } while (gauge(d, p) > 1.0);
        out = p.ambient();
      };
    } else {
      throw StructuralError("boxcount: unknown set '" + set + "'");
    }
    cover = box_count_stream(d, n, filler, scales, c.threads);
    if (write_samples) {
      std::vector<std::string> header;
      for (int k = 0; k < G.dim(); ++k) header.push_back("x" + std::to_string(k));
      std::vector<std::vector<double>> rows;
      Eigen::VectorXd buf(G.dim());
      for (std::int64_t i = 0; i < std::min(n, cap); ++i) {
        filler(i, buf);
        std::vector<double> row;
        for (int k = 0; k < G.dim(); ++k) row.push_back(buf[k]);
        rows.push_back(std::move(row));
      }
      io::write_csv(c.out / "samples.csv", header, rows);
      add_artifact(summary, "samples.csv");
    }
  }

  io::write_json(c.out / "cover.json", io::cover_to_json(cover));
  add_artifact(summary, "cover.json");

  json& r = summary["results"];
  r["set"] = set;
  r["n_points"] = cover.n_points;
  r["slope"] = cover.slope;
  r["ci"] = cover.ci;
  r["kappa"] = cover.kappa;
  r["diameter"] = cover.diameter;
  r["span_decades"] = cover.span_decades;
  int in_fit = 0;
  for (std::uint8_t f : cover.in_fit) in_fit += f != 0;
  r["fit_scales"] = in_fit;

  Gates gates{&r, {}};
  if (c.params.contains("expect")) {
    const json& e = req_obj(c.params, "expect", "boxcount");
    io::require_keys(e, {"slope", "band"}, "boxcount expect");
    const double want = num_or(e, "slope", 0.0, "boxcount");
    const double eband = num_or(e, "band", 0.1, "boxcount");
    gates.check("slope", std::abs(cover.slope - want) <= eband);
  }
  gates.finish();
}

// ---------------------------------------------------------------------------
// ifs: self-similar systems, their invariants, and the sampled attractor

IFSSystem system_from_params(const GroupStructure& G, const json& params, const char* who) {
  if (!params.contains("maps") || !params.at("maps").is_array())
    throw StructuralError(std::string(who) + ": 'maps' must be a list");
  IFSSystem sys;
  for (const json& m : params.at("maps")) {
    io::require_keys(m, {"translation", "ratio"}, "ifs map");
    const std::vector<double> t = req_list(m, "translation", who);
    IFSMap map;
    map.p = point_from_ambient(G, vec_of(t));
    map.ratio = num_or(m, "ratio", 0.5, who);
    sys.maps.push_back(std::move(map));
  }
  return sys;
}

void run_ifs(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"maps", "n_points", "scales", "probe_points", "write_samples",
                    "samples_cap", "expect"},
                   "ifs params");
  IFSSystem sys = system_from_params(c.G, c.params, "ifs");
  if (sys.maps.empty()) throw DomainError("ifs: need at least one map");
  const std::int64_t n = int_or(c.params, "n_points", 65536, "ifs");
  const int probes = static_cast<int>(int_or(c.params, "probe_points", 512, "ifs"));
  const bool write_samples = bool_or(c.params, "write_samples", false, "ifs");
  const std::int64_t cap = int_or(c.params, "samples_cap", 100000, "ifs");

  const double moran = moran_dimension(sys);
  const SeparationReport sep = ifs_separation(c.d, sys, probes, c.seed);
  const Eigen::MatrixXd pts = ifs_attractor(c.G, sys, n, c.seed);

  json& r = summary["results"];
  r["moran_dim"] = moran;
  r["min_gap"] = sep.min_gap;
  r["max_image_diameter"] = sep.max_image_diameter;
  r["well_separated"] = sep.well_separated;

  Gates gates{&r, {}};
  if (c.params.contains("scales")) {
    const CoverReport cover =
        box_count(c.d, pts, req_list(c.params, "scales", "ifs"), c.threads);
    io::write_json(c.out / "cover.json", io::cover_to_json(cover));
    add_artifact(summary, "cover.json");
    r["slope"] = cover.slope;
    r["ci"] = cover.ci;
    r["kappa"] = cover.kappa;
    if (c.params.contains("expect")) {
      const json& e = req_obj(c.params, "expect", "ifs");
      io::require_keys(e, {"dim", "band"}, "ifs expect");
      gates.check("dimension", std::abs(cover.slope - num_or(e, "dim", moran, "ifs")) <=
                                   num_or(e, "band", 0.1, "ifs"));
    }
  } else if (c.params.contains("expect")) {
    throw StructuralError("ifs: 'expect' needs 'scales' for the box-count slope");
  }

  if (write_samples) {
    std::vector<std::string> header;
    for (int k = 0; k < c.G.dim(); ++k) header.push_back("x" + std::to_string(k));
    std::vector<std::vector<double>> rows;
    for (std::int64_t i = 0; i < std::min(n, cap); ++i) {
      std::vector<double> row;
      for (int k = 0; k < c.G.dim(); ++k) row.push_back(pts(k, i));
      rows.push_back(std::move(row));
    }
    io::write_csv(c.out / "attractor.csv", header, rows);
    add_artifact(summary, "attractor.csv");
  }
  gates.finish();
}

// ---------------------------------------------------------------------------
// potential-eval: the potential of a configured measure at listed points

void run_potential_eval(Ctx& c, json& summary) {
  io::require_keys(c.params, {"measure", "points", "calibrate"}, "potential-eval params");
  const json& mspec = req_obj(c.params, "measure", "potential-eval");

  RadonMeasure mu;
  if (mspec.contains("path")) {
    io::require_keys(mspec, {"path"}, "potential-eval measure");
    if (!mspec.at("path").is_string())
      throw StructuralError("potential-eval: measure 'path' must be a string");
    const std::filesystem::path mp = c.config_dir / mspec.at("path").get<std::string>();
    mu = io::measure_from_json(c.G, io::read_json(mp), mp.parent_path());
  } else {
    mu = io::measure_from_json(c.G, mspec, c.config_dir);
  }

  if (!c.params.contains("points") || !c.params.at("points").is_array() ||
      c.params.at("points").empty())
    throw StructuralError("potential-eval: 'points' must be a nonempty list of coordinates");
  std::vector<Point> pts;
  for (const json& x : c.params.at("points"))
    pts.push_back(point_from_ambient(c.G, vec_of(number_list(x, "points", "potential-eval"))));

  GaugeFn g = c.d;
  try {
    g.c_gamma = gamma_constant_closed_form(g);
    g.calibrated = true;
  } catch (const DomainError&) {
    if (bool_or(c.params, "calibrate", false, "potential-eval")) {
      CalibrationGrid grid;
      grid.threads = c.threads;
      calibrate_constant(g, {}, grid);
    }
  }

  const std::vector<double> vals = potential_eval_batch(g, mu, pts, c.threads);

  std::vector<std::string> header;
  for (int k = 0; k < c.G.dim(); ++k) header.push_back("x" + std::to_string(k));
  header.push_back("value");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> row;
    for (int k = 0; k < c.G.dim(); ++k) row.push_back(pts[i].ambient()[k]);
    row.push_back(vals[i]);
    rows.push_back(std::move(row));
  }
  io::write_csv(c.out / "potential.csv", header, rows);
  add_artifact(summary, "potential.csv");

  int n_inf = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : vals) {
    if (std::isinf(v)) {
      ++n_inf;
      continue;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  json& r = summary["results"];
  r["n_points"] = static_cast<std::int64_t>(pts.size());
  r["n_infinite"] = n_inf;
  if (n_inf < static_cast<int>(vals.size())) {
    r["min_finite"] = lo;
    r["max_finite"] = hi;
  } else {
    r["min_finite"] = nullptr;
    r["max_finite"] = nullptr;
  }
  r["c_gamma"] = g.c_gamma;
  r["measure_mass"] = mu.total_mass();
}

// ---------------------------------------------------------------------------
// divergence-probe: on-curve singularity growth vs far-mass stability

void run_divergence_probe(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"t_mins", "delta", "direction", "far_point", "exponent_band",
                    "stability_tol", "quad_tol"},
                   "divergence-probe params");
  const std::vector<double> t_mins = list_or(
      c.params, "t_mins", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}, "divergence-probe");
  const double delta = num_or(c.params, "delta", 1.0, "divergence-probe");
  const double band = num_or(c.params, "exponent_band", 0.05, "divergence-probe");
  const double stab_tol = num_or(c.params, "stability_tol", 1e-6, "divergence-probe");
  const double quad_tol = num_or(c.params, "quad_tol", 1e-9, "divergence-probe");
  if (t_mins.size() < 2) throw DomainError("divergence-probe: need >= 2 cutoffs");
  for (std::size_t i = 0; i < t_mins.size(); ++i) {
    if (!(t_mins[i] > 0) || !(t_mins[i] < delta))
      throw DomainError("divergence-probe: cutoffs must lie in (0, delta)");
    if (i && !(t_mins[i] < t_mins[i - 1]))
      throw DomainError("divergence-probe: cutoffs must descend");
  }

  const GroupStructure& G = c.G;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(G.n1());
  u[0] = 1.0;
  if (c.params.contains("direction")) {
    u = vec_of(number_list(c.params.at("direction"), "direction", "divergence-probe"));
    if (u.size() != G.n1())
      throw StructuralError("divergence-probe: 'direction' needs one entry per slot of the first layer");
    if (u.norm() == 0) throw DomainError("divergence-probe: direction must be nonzero");
  }
  Eigen::VectorXd far = Eigen::VectorXd::Zero(G.dim());
  far[0] = 3.0;
  if (c.params.contains("far_point"))
    far = vec_of(number_list(c.params.at("far_point"), "far_point", "divergence-probe"));

  const HorizontalCurve curve = make_horizontal_ray(G, identity(G), u, delta);
  const RadonMeasure mu_on = make_atomic({{identity(G), 1.0}});
  const RadonMeasure mu_far = make_atomic({{point_from_ambient(G, far), 1.0}});
  const double expo = G.divergence_exponent();

  std::vector<double> on, off, log_t, log_on;
  std::vector<std::vector<double>> rows;
  for (double tm : t_mins) {
    // The quadrature tolerance is absolute and the on-curve partial grows
    // like 1/t_min, so hold the relative precision instead.
    on.push_back(
        horizontal_curve_integrate(c.d, mu_on, curve, expo, tm,
                                   quad_tol * std::max(1.0, 1.0 / tm)));
    off.push_back(horizontal_curve_integrate(c.d, mu_far, curve, expo, tm, quad_tol));
    if (!(on.back() > 0) || !std::isfinite(on.back()))
      throw AccuracyError("divergence-probe: on-curve partial integral degenerated");
    log_t.push_back(std::log(tm));
    log_on.push_back(std::log(on.back()));
    rows.push_back({tm, on.back(), off.back()});
  }
  const LineFit fit = fit_line(log_t, log_on);
  const std::size_t m = off.size();
  const double stability = std::abs(off[m - 1] - off[m - 2]) / std::abs(off[m - 1]);

  io::write_csv(c.out / "partials.csv", {"t_min", "partial_on_curve", "partial_far"}, rows);
  add_artifact(summary, "partials.csv");

  json& r = summary["results"];
  r["exponent"] = fit.slope;
  r["far_stability"] = stability;
  r["partials_on_curve"] = on;
  r["partials_far"] = off;

  Gates gates{&r, {}};
  gates.check("on_curve_exponent", std::abs(fit.slope + 1.0) <= band);
  gates.check("far_mass_stability", stability <= stab_tol);
  gates.finish();
}

// ---------------------------------------------------------------------------
// threshold: the dimension-threshold evidence table

void run_threshold(Ctx& c, json& summary) {
  io::require_keys(c.params,
                   {"maps", "target_dim", "curves", "n_points", "scales", "dim_ci_max",
                    "t_mins", "quad_tol", "finiteness_y_draws", "certify_giraud", "quad"},
                   "threshold params");
  IFSSystem sys = system_from_params(c.G, c.params, "threshold");
  if (!c.params.contains("target_dim") || !c.params.at("target_dim").is_number())
    throw StructuralError("threshold: 'target_dim' must be a number");
  const double target = c.params.at("target_dim").get<double>();

  if (!c.params.contains("curves") || !c.params.at("curves").is_array())
    throw StructuralError("threshold: 'curves' must be a list");
  std::vector<HorizontalCurve> curves;
  for (const json& spec : c.params.at("curves")) {
    io::require_keys(spec, {"start", "u", "delta"}, "threshold curve");
    const Eigen::VectorXd start = vec_of(req_list(spec, "start", "threshold"));
    const Eigen::VectorXd u = vec_of(req_list(spec, "u", "threshold"));
    if (u.size() != c.G.n1())
      throw StructuralError("threshold: curve 'u' needs one entry per slot of the first layer");
    curves.push_back(make_horizontal_ray(c.G, point_from_ambient(c.G, start), u,
                                         num_or(spec, "delta", 1.0, "threshold")));
  }

  ThresholdParams prm;
  prm.n_points = int_or(c.params, "n_points", prm.n_points, "threshold");
  prm.seed = c.seed;
  prm.scales = req_list(c.params, "scales", "threshold");
  prm.dim_ci_max = num_or(c.params, "dim_ci_max", prm.dim_ci_max, "threshold");
  prm.t_mins = list_or(c.params, "t_mins", prm.t_mins, "threshold");
  prm.quad_tol = num_or(c.params, "quad_tol", prm.quad_tol, "threshold");
  prm.finiteness_y_draws = static_cast<int>(
      int_or(c.params, "finiteness_y_draws", prm.finiteness_y_draws, "threshold"));
  prm.certify_giraud = bool_or(c.params, "certify_giraud", prm.certify_giraud, "threshold");
  if (c.params.contains("quad")) {
    const json& q = req_obj(c.params, "quad", "threshold");
    io::require_keys(q, {"theta", "r_core_rel", "cert_tol", "refine_factor", "max_cells"},
                     "threshold quad");
    prm.quad.theta = num_or(q, "theta", prm.quad.theta, "threshold");
    prm.quad.r_core_rel = num_or(q, "r_core_rel", prm.quad.r_core_rel, "threshold");
    prm.quad.cert_tol = num_or(q, "cert_tol", prm.quad.cert_tol, "threshold");
    prm.quad.refine_factor = num_or(q, "refine_factor", prm.quad.refine_factor, "threshold");
    prm.quad.max_cells = int_or(q, "max_cells", prm.quad.max_cells, "threshold");
  }
  prm.threads = c.threads;

  const MeasureBuilder builder = [](const GroupStructure& G, const EmpiricalMeasure& nu) {
    return to_radon(G, nu);
  };
  const ThresholdReport rep = threshold_experiment(c.d, sys, target, builder, curves, prm);

  json& r = summary["results"];
  r["measured_dim"] = rep.measured_dim;
  r["dim_ci"] = rep.dim_ci;
  r["moran_dim"] = rep.moran_dim;
  r["threshold"] = rep.threshold;
  r["above_threshold"] = rep.above_threshold;
  r["n_divergent"] = rep.n_divergent;
  r["curves"] = json::array();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rep.curves.size(); ++i) {
    const CurveDiagnostic& cd = rep.curves[i];
    json entry;
    entry["fitted_exponent"] = cd.fitted_exponent;
    entry["last_growth"] = cd.last_growth;
    entry["divergent"] = cd.divergent;
    r["curves"].push_back(std::move(entry));
    for (std::size_t k = 0; k < cd.partials.size(); ++k)
      rows.push_back({static_cast<double>(i), prm.t_mins[k], cd.partials[k]});
  }
  io::write_csv(c.out / "curves.csv", {"curve", "t_min", "partial"}, rows);
  add_artifact(summary, "curves.csv");

  Gates gates{&r, {}};
  if (rep.above_threshold) {
    r["finiteness_estimate"] = rep.finiteness_estimate;
    r["finiteness_half"] = rep.finiteness_half;
    r["finiteness_drift"] = rep.finiteness_drift;
    r["finiteness_converged"] = rep.finiteness_converged;
    r["giraud_ratio"] = rep.giraud_ratio;
    r["certified_bound"] = rep.certified_bound;
    r["finite_witness"] = rep.finite_witness;
    gates.check("finite_witness", rep.finite_witness);
    gates.check("finiteness_converged", rep.finiteness_converged);
  } else {
    gates.check("divergence_observed", rep.n_divergent >= 1);
  }
  gates.finish();
}

// ---------------------------------------------------------------------------
// dispatch

using Runner = void (*)(Ctx&, json&);

struct Entry {
  ExperimentInfo info;
  Runner run;
};

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      {{"group-check", "group laws, dilations, and the H-type identity on random triples", true},
       run_group_check},
      {{"gauge-check", "gauge homogeneity and symmetry plus the kernel stencil residual order",
        true},
       run_gauge_check},
      {{"calibrate", "quadrature calibration of the kernel constant against the closed form",
        false},
       run_calibrate},
      {{"flow-check", "radial flow: gauge linearity, constant speed, semigroup, jacobian", true},
       run_flow_check},
      {{"polar-check", "polar integration formula against direct quadrature, sphere total",
        true},
       run_polar_check},
      {{"giraud-scan", "two-singularity kernel ratio vs separation with the annulus split",
        true},
       run_giraud_scan},
      {{"boxcount", "box-counting dimension of built-in or CSV point sets", true},
       run_boxcount},
      {{"ifs", "self-similar system: Moran exponent, separation, sampled attractor", true},
       run_ifs},
      {{"potential-eval", "potential of a configured measure at listed points", false},
       run_potential_eval},
      {{"divergence-probe", "partial curve integrals: on-curve growth, far-mass stability",
        false},
       run_divergence_probe},
      {{"threshold", "dimension-threshold evidence table for curve divergence", true},
       run_threshold},
  };
  return entries;
}

const Entry& find_entry(const std::string& name) {
  for (const Entry& e : table())
    if (e.info.name == name) return e;
  throw StructuralError("config: unknown experiment '" + name + "'");
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CARNOT_POTENTIAL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 0;
}

}  // namespace

const std::vector<ExperimentInfo>& registry() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> out;
    for (const Entry& e : table()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

RunOutcome run_experiment(const io::json& config, const std::filesystem::path& out_dir,
                          int threads, std::optional<std::uint64_t> seed_override,
                          const std::filesystem::path& config_dir) {
  json summary;
  summary["schema"] = kSchemaName;
  summary["experiment"] =
      config.is_object() && config.contains("experiment") && config.at("experiment").is_string()
          ? config.at("experiment").get<std::string>()
          : "";
  summary["status"] = "ok";
  summary["errors"] = json::array();
  summary["results"] = json::object();
  summary["artifacts"] = json::array();

  int code = 0;
  try {
    std::filesystem::create_directories(out_dir);
    if (!config.is_object()) throw StructuralError("config: expected a JSON object");
    io::require_keys(config, {"experiment", "group", "seed", "params"}, "config");
    if (!config.contains("experiment") || !config.at("experiment").is_string())
      throw StructuralError("config: 'experiment' must name an experiment");
    const Entry& entry = find_entry(config.at("experiment").get<std::string>());
    if (!config.contains("group"))
      throw StructuralError("config: missing required key 'group'");

    Ctx ctx;
    ctx.G = io::group_from_json(config.at("group"));
    ctx.d = make_gauge(ctx.G);
    ctx.params = json::object();
    if (config.contains("params")) {
      if (!config.at("params").is_object())
        throw StructuralError("config: 'params' must be an object");
      ctx.params = config.at("params");
    }
    if (config.contains("seed")) {
      const json& s = config.at("seed");
      if (!s.is_number_integer() && !s.is_number_unsigned())
        throw StructuralError("config: 'seed' must be a nonnegative integer");
      if (s.is_number_integer() && s.get<std::int64_t>() < 0)
        throw StructuralError("config: 'seed' must be a nonnegative integer");
      ctx.seed = s.get<std::uint64_t>();
    } else if (entry.info.randomized) {
      throw StructuralError("config: experiment '" + entry.info.name +
                            "' is randomized; 'seed' is required");
    }
    if (seed_override) ctx.seed = *seed_override;
    summary["seed"] = ctx.seed;
    ctx.out = out_dir;
    ctx.config_dir = config_dir;
    ctx.threads = resolve_threads(threads);

    entry.run(ctx, summary);
  } catch (const StructuralError& e) {
    summary["status"] = "validation-error";
    summary["errors"].push_back(e.what());
    code = 2;
  } catch (const DomainError& e) {
    summary["status"] = "validation-error";
    summary["errors"].push_back(e.what());
    code = 2;
  } catch (const AccuracyError& e) {
    summary["status"] = "accuracy-failure";
    summary["errors"].push_back(e.what());
    code = 3;
  } catch (const std::exception& e) {
    summary["status"] = "validation-error";
    summary["errors"].push_back(std::string("unexpected: ") + e.what());
    code = 2;
  }

  try {
    io::write_json(out_dir / "summary.json", summary);
  } catch (const std::exception& e) {
    summary["errors"].push_back(e.what());
    if (code == 0) code = 2;
  }
  return {code, summary};
}

}  // namespace carnot::experiments
