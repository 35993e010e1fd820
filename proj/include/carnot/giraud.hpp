#ifndef CARNOT_GIRAUD_HPP
#define CARNOT_GIRAUD_HPP

#include <cstdint>
#include <vector>

#include "carnot/fit.hpp"
#include "carnot/gauge.hpp"

// Two-singularity convolution kernels
//   int_Omega d(y^{-1} o x)^{a-Q} d(p^{-1} o x)^{b-Q} dx,  a, b in (0,Q), a+b < Q,
// their separation-normalized ratio, and the proof-shaped annulus
// decomposition used as an independent cross-check.
//
// Quadrature design: one chart per singularity in group-displacement
// coordinates z = c^{-1} o x (so the chart's own kernel factor is the plain
// gauge of z), glued by a smooth partition of unity in
// u = d_self/(d_self + d_other) whose two halves sum to 1 exactly. Cells are
// axis-aligned in z and split anisotropically (first layer ~ theta * d,
// second layer ~ theta * d^2, with shear-aware terms for the other
// singularity); a smooth core cutoff inside gauge radius r_core is replaced
// by its closed-form mass sigma(S) r^alpha M(alpha). The translated domain
// stays exact: Omega = base o (axis box) clips cells only through affine
// second-layer constraints, and only where the integrand is smooth.

namespace carnot {

// Region base o {axis-aligned box}; translating base keeps the region's group
// geometry intact, which is what makes the translation invariance exact.
struct GroupBox {
  Point base;
  Eigen::VectorXd lo, hi;  // ambient corner coordinates of the untranslated box
};

void check_group_box(const GroupStructure& G, const GroupBox& box, const char* who);

GroupBox translate_box(const GroupStructure& G, const Point& g, const GroupBox& box);
GroupBox dilate_box(const GroupStructure& G, double lambda, const GroupBox& box);

struct InequalityCase {
  GaugeFn gauge;
  GroupBox omega;
  double a = 1, b = 1;
  Point p, y;
};

// DomainError unless a, b in (0,Q), a + b < Q, p != y, Omega bounded.
void validate_case(const InequalityCase& c);

struct QuadratureSpec {
  double theta = 0.35;         // cell extent per unit distance scale
  double r_core_rel = 0.02;    // analytic core radius relative to separation
  double cert_tol = 0.01;      // two-level agreement requirement
  double refine_factor = 0.6;  // theta multiplier for the certificate level
  int64_t max_cells = 300000000;
};

struct KernelResult {
  double value = 0;    // refined level
  double coarse = 0;   // base level
  double rel_gap = 0;
  int64_t cells = 0;   // evaluated cells, both levels
};

// Certified value; AccuracyError when the two refinement levels disagree
// beyond spec.cert_tol or the cell budget runs out.
KernelResult kernel_integral_certified(const InequalityCase& c, const QuadratureSpec& spec = {});

double kernel_integral(const InequalityCase& c, const QuadratureSpec& spec = {});

// kernel_integral * d(p^{-1} o y)^{Q-(a+b)}: the quantity bounded by the
// inequality's constant.
double giraud_ratio(const InequalityCase& c, const QuadratureSpec& spec = {});

struct AnnulusReport {
  double I = 0, II1 = 0, II2 = 0, III = 0;
  double sum = 0;            // I + II1 + II2 + III
  double whole = 0;          // independent two-chart kernel_integral
  double partition_err = 0;  // |sum - whole| / whole
  double sep = 0;            // d(p), y normalized to the identity
  double bound_scale = 0;    // sep^{a+b-Q}
  double I_norm = 0, II1_norm = 0, II2_norm = 0, III_norm = 0;
  bool cover_inner = true;   // B(p, sep/2) and B(e, sep/2) inside Omega
  bool cover_shell = true;   // B(p, 3 sep) inside Omega
};

// Proof-shaped split: I over B(p, sep/2); II over B(p, 3 sep) minus that,
// cut by B(e, sep/2) into II1/II2; III outside B(p, 3 sep). y must be the
// identity (the proof's normalization). Every quadrature cell is assigned to
// exactly one piece by its center, so sum equals the single-chart total by
// construction; `whole` comes from the independent two-chart pipeline.
AnnulusReport annulus_decomposition(const InequalityCase& c, const QuadratureSpec& spec = {});

struct ScanRow {
  double a = 0, b = 0;
  double sep = 0;      // realized gauge separation
  double ratio = 0;    // NaN when not converged
  bool converged = false;
};

struct ScanTable {
  std::vector<ScanRow> rows;
};

// Per (a,b): pair_samples separations log-spaced over [sep_min, sep_max] with
// seeded random directions; ratio per pair. Nonconverged cells are flagged,
// not fatal. Empty grids give an empty table.
ScanTable constant_scan(const GaugeFn& d, const std::vector<double>& a_grid,
                        const std::vector<double>& b_grid, int pair_samples, std::uint64_t seed,
                        const GroupBox& omega, double sep_min, double sep_max,
                        const QuadratureSpec& spec = {});

// Least-squares fit of log ratio vs log separation over the converged rows of
// one (a,b) cell; the boundedness protocol checks slope = 0 within CI.
LineFit ratio_slope(const ScanTable& table, double a, double b);

}  // namespace carnot

#endif
