#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "xtend/string_model.hpp"

namespace xtend {

/// Neumann-type and Dirichlet-type solutions of the string equation on the
/// nodes of an atomic string. Stored values are scaled by 2^scale_exp[j] so
/// that large lambda * y never overflows; ratios are scale-free.
struct FundamentalPair {
  double lambda = 0.0;
  std::vector<double> nodes;
  std::vector<double> fN, fD;  // values at z_j
  std::vector<double> pN, pD;  // right derivatives at z_j (after the jump at z_j)
  std::vector<int> scale_exp;

  std::size_t size() const { return nodes.size(); }
  /// |fN pD - fD pN - 1| relative to |fN pD| + |fD pN|, in unscaled terms.
  double wronskian_defect(std::size_t j) const;
  double upper(std::size_t j) const { return fN[j] / fD[j]; }
  double lower(std::size_t j) const { return pN[j] / pD[j]; }
};

/// Exact chain recursion for the atomic string: at node j the derivative jumps
/// by lambda * w_j * f(z_j), then f moves linearly to the next node.
FundamentalPair solve_pair(const AtomicString& a, double lambda, double y_max);

/// Leading convergence order of the lumped scheme in the spacing: 2 for
/// densities bounded near the origin, 1 + delta for a y^(delta - 1) singularity.
double scheme_order(const KreinString& s);

struct PsiOptions {
  double tol = 1e-8;            // relative
  double theta = 0.1;           // level-0 spacing in units of the string's length scale
  int max_levels = 9;
  std::size_t max_nodes = 1'500'000;
  double y_end_factor = 14.0;   // initial truncation in units of the length scale
};

struct PsiValue {
  double value = 0.0;
  double lo = 0.0;              // certified bracket of the finest atomic string
  double hi = 0.0;
  double y_max_used = 0.0;
  double mesh_error = 0.0;      // estimated distance to the continuum value
  int levels = 0;
  std::size_t nodes = 0;
};

/// psi(lambda) as the limit of fN/fD: two-sided bracket per mesh, mesh
/// halving with Richardson extrapolation across levels. lambda = 0 returns
/// 1/R exactly.
PsiValue psi(const KreinString& s, double lambda, const PsiOptions& opts = {});

/// phi(lambda, .) = fN - psi fD on the two finest meshes; every query is
/// Richardson-combined across them when the observed order matches the
/// expected one.
class ModeProfile {
 public:
  struct Level {
    std::vector<double> z;
    std::vector<double> dist;
    std::vector<double> phi;
    std::vector<double> slope;  // right slope on (z_j, z_{j+1})
    std::vector<double> atom;   // lumped atom mass carried by node j (excluding density)
    double psi_atomic = 0.0;
    Closure closure = Closure::Open;
  };

  ModeProfile(std::shared_ptr<const KreinString> s, double lambda, double psi,
              std::vector<Level> levels, double richardson);

  double lambda() const { return lambda_; }
  double psi() const { return psi_; }
  double y_end() const { return levels_.back().z.back(); }

  double phi(double y) const;
  /// Right derivative at y: cell slope corrected by the density between the
  /// cell midpoint and y, second order in the spacing.
  double dphi_right(double y) const;
  /// lim_{y -> 0+} of the right derivative: -psi + lambda * m0.
  double dphi_zero() const;
  /// Integral of phi against the string measure over the interval.
  double integral(double a, double b, bool closed_left, bool closed_right) const;

 private:
  template <typename F>
  double combine(F&& per_level) const;

  std::shared_ptr<const KreinString> s_;
  double lambda_;
  double psi_;
  std::vector<Level> levels_;
  double richardson_;  // 1 / (2^p - 1), 0 when the levels are not combined
};

ModeProfile mode_profile(std::shared_ptr<const KreinString> s, double lambda, double y_needed,
                         const PsiOptions& opts = {});

/// phi(lambda, y). phi(lambda, 0) = 1 and phi(0, y) = 1 - psi(0) y.
double phi(const KreinString& s, double lambda, double y, const PsiOptions& opts = {});

/// Right derivative via -psi + lambda * integral of phi over [0, y].
double dphi_forward(const KreinString& s, double lambda, double y, const PsiOptions& opts = {});

/// |lim_{y up to y1} d+phi + lambda m1 phi(y1)| for CaseC strings.
double case_c_residual(const KreinString& s, double lambda, const PsiOptions& opts = {});

/// psi as a cached function of lambda, bound to one string.
class BernsteinFn {
 public:
  explicit BernsteinFn(std::shared_ptr<const KreinString> s, PsiOptions opts = {});

  const KreinString& string() const { return *s_; }
  std::shared_ptr<const KreinString> string_ptr() const { return s_; }
  const PsiOptions& options() const { return opts_; }

  double operator()(double lambda) const { return evaluate(lambda).value; }
  PsiValue evaluate(double lambda) const;
  double psi0() const;
  std::shared_ptr<const ModeProfile> profile(double lambda, double y_needed = 0.0) const;

  /// Evaluates the grid in parallel; results do not depend on scheduling.
  std::vector<PsiValue> evaluate_grid(std::span<const double> lambdas) const;

 private:
  std::shared_ptr<const KreinString> s_;
  PsiOptions opts_;
  mutable std::mutex mu_;
  mutable std::map<double, PsiValue> values_;
  mutable std::map<double, std::shared_ptr<const ModeProfile>> profiles_;
};

struct DiagnosticViolation {
  std::string check;
  double lambda = 0.0;
  double magnitude = 0.0;
};

struct DiagnosticsReport {
  bool nonnegative_nondecreasing = true;   // (i)
  bool alternating_differences = true;     // (ii)
  bool ratio_nonincreasing = true;         // (iii)
  bool ratio_constant = false;             // (iii) degenerate: psi(l)/l constant
  double slope_ratio = 0.0;                // (iv) psi(l_max)/l_max
  double slope_secant = 0.0;               // (iv) secant over the two largest points
  double slope_gap = 0.0;                  // (iv) secant - m0
  bool linear_growth = true;               // (v)
  double linear_constant = 0.0;            // (v) c in psi(l) <= c * max(1, l)
  std::vector<DiagnosticViolation> violations;

  bool pass() const {
    return nonnegative_nondecreasing && alternating_differences && ratio_nonincreasing && linear_growth;
  }
};

/// Qualitative complete-Bernstein checks on a tabulated psi.
DiagnosticsReport bernstein_diagnostics(std::span<const double> lambdas, std::span<const double> values,
                                        double m0 = 0.0, double rel_tol = 1e-7);

/// phi(lambda, y) for fixed y, tabulated on a log-lambda grid and
/// interpolated; used when thousands of symbol values are needed.
class PhiTable {
 public:
  PhiTable(const BernsteinFn& psi, double y, double lambda_max, int points_per_decade = 40);
  double operator()(double lambda) const;

 private:
  double y_;
  double phi_zero_;
  double log_min_;
  double log_step_;
  std::vector<double> log_phi_;
  std::vector<double> values_;
};

}  // namespace xtend
