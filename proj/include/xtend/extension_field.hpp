#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xtend/krein_solver.hpp"
#include "xtend/operator_calculus.hpp"

namespace xtend {

/// "lin:a:b:n" or "geo:a:b:n:p"; b may be the literal "y1". Geometric grids
/// cluster toward a, and toward b as well when b is the string's endpoint.
/// Points at or beyond R are dropped.
std::vector<double> parse_y_grid(const std::string& spec, const KreinString& s);

/// u(x, y) = sum_k phi(lambda_k, y) c_k e_k(x).
class ExtensionSolution {
 public:
  const KreinString& string() const { return psi_->string(); }
  const BernsteinFn& psi() const { return *psi_; }
  const DiscreteGenerator& generator() const { return *L_; }
  const StringClass& string_class() const { return class_; }
  const std::vector<double>& y_grid() const { return y_; }
  const Eigen::VectorXd& f() const { return f_; }
  const Eigen::VectorXd& coefficients() const { return c_; }
  /// u(x_i, y_j), rows are x.
  const Eigen::MatrixXd& values() const { return u_; }
  const ModeProfile& profile(std::size_t k) const { return *profiles_[k]; }
  std::size_t modes() const { return profiles_.size(); }

  /// u(., y) at an arbitrary height 0 <= y < R.
  Eigen::VectorXd at(double y) const;
  /// d+ u(., y), mode-wise.
  Eigen::VectorXd dy_right(double y) const;
  /// d+ u(., 0).
  Eigen::VectorXd neumann() const;
  /// m0 L u(., 0).
  Eigen::VectorXd sticky_term() const;

 private:
  friend ExtensionSolution extend(std::shared_ptr<const BernsteinFn>, std::shared_ptr<const DiscreteGenerator>,
                                  const Eigen::VectorXd&, std::vector<double>);
  std::shared_ptr<const BernsteinFn> psi_;
  std::shared_ptr<const DiscreteGenerator> L_;
  StringClass class_;
  std::vector<double> y_;
  Eigen::VectorXd f_;
  Eigen::VectorXd c_;
  Eigen::MatrixXd u_;
  std::vector<std::shared_ptr<const ModeProfile>> profiles_;
};

ExtensionSolution extend(std::shared_ptr<const BernsteinFn> psi, std::shared_ptr<const DiscreteGenerator> L,
                         const Eigen::VectorXd& f, std::vector<double> y_grid);

/// d+ u(., 0) + m0 L u(., 0).
Eigen::VectorXd dirichlet_to_neumann(const ExtensionSolution& sol);

struct FiniteDifferenceCheck {
  std::vector<double> steps;
  std::vector<double> raw_errors;          // sup |D(h) - d+u(., 0)|
  std::vector<double> extrapolant_errors;  // after removing the leading h^p term
  std::vector<double> observed_orders;     // of the extrapolants
  double leading_exponent = 1.0;
  double min_order() const;
};

/// One-sided differences (u(., h) - f) / h at h0, h0/2, h0/4, h0/8 against the
/// modal d+ u(., 0). Heights are resolved by a forward march on [0, h0]
/// with the solver's psi, independent of the stored profiles.
FiniteDifferenceCheck dton_finite_difference_check(const ExtensionSolution& sol, double h0 = 0.0);

/// Smooth bump exp(1 - 1/(1 - t^2)), t = (y - center) / radius.
struct Bump {
  double center = 1.0;
  double radius = 0.5;
  double value(double y) const;
  double second_derivative(double y) const;
  double lo() const { return center - radius; }
  double hi() const { return center + radius; }
};

/// Bumps at three scales inside (0, min(R, y1)) (or (0, 2) when unbounded).
std::vector<Bump> bump_family(const KreinString& s);

/// Mode-wise field: values phi(k, y) times c_k e_k.
struct ModalField {
  std::shared_ptr<const DiscreteGenerator> L;
  Eigen::VectorXd coeffs;
  std::function<double(std::size_t, double)> phi;
};

ModalField modal_field(const ExtensionSolution& sol);

/// max_x | int L u g dm + int u g'' dy | by composite Simpson at spacing h,
/// atoms inside the support added exactly.
double weak_residual(const KreinString& s, const ModalField& u, const Bump& g, double h = 1e-2);
double weak_residual(const ExtensionSolution& sol, const Bump& g, double h = 1e-2);

/// max_x | d+u(y_hi) - d+u(y_lo) + int_(y_lo, y_hi] L u dm |.
double forward_derivative_jump_check(const ExtensionSolution& sol, double y_lo, double y_hi);

struct BoundaryReport {
  StringCase variant = StringCase::CaseA;
  bool applicable = false;
  std::string condition;
  std::vector<double> distances;  // y1 - y for the CaseB scan
  std::vector<double> sup_values; // sup_x |u(x, y1 - d)|
  bool decreasing = true;
  double oscillation = 0.0;       // CaseB: max_x |u(x_{i+1}, y) - u(x_i, y)| at the closest height
  double residual = 0.0;          // CaseC: sup_x |d-u(y1-) - m1 L u(y1)|
  bool pass = true;
};

BoundaryReport boundary_behavior_check(const ExtensionSolution& sol, double tol = 1e-6);

/// Law of X(tau_0) for L = Laplacian on the line, started at 0: the inverse
/// Fourier transform of phi(|xi|^2, y) on a periodic box.
class HarmonicMeasure {
 public:
  HarmonicMeasure(const BernsteinFn& psi, double y, double box = 2000.0, int log2_points = 16);

  double mass() const { return mass_; }
  double density(double x) const;
  double cdf(double x) const;
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& values() const { return density_; }

 private:
  double dx_ = 0.0;
  double mass_ = 0.0;
  std::vector<double> x_;
  std::vector<double> density_;
  std::vector<double> cdf_;
};

std::vector<double> harmonic_measure_density(const BernsteinFn& psi, double y, const std::vector<double>& x_grid);

}  // namespace xtend
