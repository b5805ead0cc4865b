#pragma once

#include <limits>
#include <string_view>
#include <vector>

namespace xtend {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class DensityKind { Constant, Power, BoundaryPower, Grid };

/// Absolutely continuous part b^{-2}(y) of the string measure on (0, y1).
///
///   Constant       c
///   Power          c * delta * y^(delta - 1)   (cumulative c * y^delta)
///   BoundaryPower  c * (y1 - y)^(-gamma)
///   Grid           piecewise-linear interpolation of samples
struct DensitySpec {
  DensityKind kind = DensityKind::Constant;
  double scale = 1.0;
  double exponent = 1.0;  // delta for Power, gamma for BoundaryPower
  std::vector<double> grid_y;
  std::vector<double> grid_v;

  static DensitySpec constant(double c);
  static DensitySpec power(double delta, double c = 1.0);
  static DensitySpec boundary_power(double gamma, double c = 1.0);
  static DensitySpec grid(std::vector<double> y, std::vector<double> v);
};

struct PointMass {
  double y = 0.0;
  double w = 0.0;
};

enum class StringCase { CaseA, CaseB1, CaseB2, CaseC };

std::string_view case_name(StringCase c);

struct StringClass {
  StringCase variant = StringCase::CaseA;
  double total_mass = kInf;  // m([0, y1])
  double moment = kInf;      // integral of (y1 - y) over [0, y1)
};

/// A sub-interval [a, a + len] of [0, y1]; `dist` is y1 - a, kept separately so
/// that cells accumulating near a finite endpoint keep full relative precision.
struct Cell {
  double a = 0.0;
  double len = 0.0;
  double dist = kInf;

  double b() const { return a + len; }
  double dist_b() const { return dist - len; }
};

/// Non-trivial Krein string given by its Lebesgue decomposition.
///
/// Strings with R < infinity that jump to +infinity at R are encoded with
/// y1 = R and `infinite_beyond` set. Immutable after construction; the
/// constructor enforces local finiteness and a.e. positivity of the density.
class KreinString {
 public:
  KreinString(double y1, DensitySpec density, double m0 = 0.0, double m1 = 0.0,
              std::vector<PointMass> atoms = {}, bool infinite_beyond = false);

  double y1() const { return y1_; }
  bool finite() const { return y1_ < kInf; }
  bool infinite_beyond() const { return infinite_beyond_; }
  double m0() const { return m0_; }
  double m1() const { return m1_; }
  const std::vector<PointMass>& atoms() const { return atoms_; }
  const DensitySpec& density_spec() const { return density_; }

  /// sup{y : m([0, y]) < infinity}.
  double R() const;

  /// b^{-2}(y) for y in (0, y1); +infinity where the density blows up.
  double density(double y) const;

  /// Integral of the density over the cell.
  double ac_mass(const Cell& c) const;
  /// Integral of y * density over the cell.
  double ac_moment(const Cell& c) const;
  /// Integral of (y1 - y) * density over the cell (finite y1 only).
  double ac_end_moment(const Cell& c) const;

  /// Integral of the density over (a, b), 0 <= a <= b <= y1.
  double ac_mass(double a, double b) const;

  /// Measure of the interval between a and b under the given endpoint
  /// conventions. Atoms at 0 and y1 count only for closed endpoints.
  double mass(double a, double b, bool closed_left, bool closed_right) const;

  /// m([0, y]) for y in [0, y1]; may be +infinity.
  double cumulative(double y) const { return mass(0.0, y, true, true); }

  Cell cell(double a, double b) const;

 private:
  void validate() const;
  double grid_value(double y) const;
  double grid_integral(double a, double b, int order) const;

  double y1_;
  DensitySpec density_;
  double m0_;
  double m1_;
  std::vector<PointMass> atoms_;
  bool infinite_beyond_;
};

/// Four boundary regimes of the string at y1, from the total mass and the
/// (y1 - y)-moment. Closed-form densities give exact verdicts; sampled grids
/// fit the growth rate near y1 and raise IndeterminateIntegral when the fit is
/// too close to the critical exponent.
StringClass classify(const KreinString& s);

enum class Closure {
  Open,       // truncated; string continues beyond the last node
  Dirichlet,  // string jumps to +infinity at the last node
  Neumann,    // last node is y1 and the string is flat beyond it
};

struct MeshSpec {
  double h = 1e-2;            // uniform spacing away from y1
  double y_end = kInf;        // truncation point when y1 = infinity
  double grade_start = 0.0;   // distance from y1 where geometric grading starts (0: auto)
  double eta = 0.0;           // truncation distance from y1 for absorbing ends (0: auto)
};

/// Lumped-mass approximation of a string: node j carries the mass of its dual
/// cell [midpoint to the left, midpoint to the right] plus any atom on it.
struct AtomicString {
  std::vector<double> nodes;   // z_0 = 0 < z_1 < ... < z_N
  std::vector<double> dist;    // y1 - z_j (infinity when y1 = infinity)
  std::vector<double> gaps;    // z_{j+1} - z_j, size N
  std::vector<double> masses;  // w_j
  double tail_mass = 0.0;      // mass beyond the last node
  double eta = 0.0;            // truncation distance from y1 (absorbing ends)
  Closure closure = Closure::Open;
  MeshSpec mesh;

  std::size_t size() const { return nodes.size(); }
  /// Sum of w_j over nodes z_j <= y.
  double mass_up_to(double y) const;
};

/// Builds the atomic approximation. Interior atoms become dedicated nodes;
/// raises MeshTooCoarse when two of them share a cell.
AtomicString atomize(const KreinString& s, const MeshSpec& mesh);

}  // namespace xtend
