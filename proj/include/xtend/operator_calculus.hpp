#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "xtend/expression.hpp"
#include "xtend/krein_solver.hpp"

namespace xtend {

enum class Domain { Interval, Torus };

/// a(x) d/dx + (1/2) sigma(x)^2 d^2/dx^2 on [lo, hi] (reflecting ends) or on
/// the torus of period hi - lo.
struct DiffusionOperator1D {
  Domain domain = Domain::Torus;
  Expression drift;
  Expression sigma;
  double lo = 0.0;
  double hi = 0.0;
  int n = 64;

  static DiffusionOperator1D laplacian_torus(int n, double period);
  static DiffusionOperator1D ornstein_uhlenbeck(int n, double half_width = 6.0);

  double a(double x) const { return drift(x); }
  double s(double x) const { return sigma(x); }
  bool is_laplacian() const;
};

/// Finite generator with its weighted eigendecomposition. With weight w,
/// the eigenvectors are w-orthonormal and L e_k = -lambda_k e_k, lambda_k >= 0.
class DiscreteGenerator {
 public:
  const DiffusionOperator1D& op() const { return op_; }
  const std::vector<double>& grid() const { return x_; }
  double h() const { return h_; }
  const Eigen::MatrixXd& matrix() const { return L_; }
  const Eigen::VectorXd& weight() const { return w_; }
  const Eigen::VectorXd& lambdas() const { return lambda_; }
  const Eigen::MatrixXd& modes() const { return E_; }
  int size() const { return static_cast<int>(x_.size()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return L_ * f; }
  /// Coordinates of f in the mode basis.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& f) const;
  Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const { return E_ * coeffs; }
  /// sum_k g(lambda_k) <f, e_k>_w e_k.
  Eigen::VectorXd spectral_apply(const Eigen::VectorXd& f, const std::function<double(double)>& g) const;
  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

 private:
  friend DiscreteGenerator discretize(const DiffusionOperator1D& op);
  DiffusionOperator1D op_;
  std::vector<double> x_;
  double h_ = 0.0;
  Eigen::MatrixXd L_;
  Eigen::VectorXd w_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd E_;
};

DiscreteGenerator discretize(const DiffusionOperator1D& op);

Eigen::VectorXd sample(const DiscreteGenerator& L, const std::function<double(double)>& f);

/// -psi(-L) f.
Eigen::VectorXd apply_psi_of_minus_L(const BernsteinFn& psi, const DiscreteGenerator& L, const Eigen::VectorXd& f);

/// e^{tL} f.
Eigen::VectorXd heat_semigroup_apply(const DiscreteGenerator& L, double t, const Eigen::VectorXd& f);

/// e^{-t psi(-L)} f.
Eigen::VectorXd subordinate_semigroup_apply(const BernsteinFn& psi, const DiscreteGenerator& L, double t,
                                            const Eigen::VectorXd& f);

/// Mean of e^{tau L} f over the sampled times; infinite taus contribute 0.
Eigen::VectorXd mixed_semigroup_apply(const DiscreteGenerator& L, const std::vector<double>& taus,
                                      const Eigen::VectorXd& f);

enum class Symbol { Continuum, Discrete };

struct FourierResult {
  std::vector<double> values;
  double discrete_gap = 0.0;  // sup |result(continuum) - result(discrete)|
};

/// -psi(|xi|^2) f on the torus [0, period)^dim; f is row-major for dim = 2.
FourierResult fourier_symbol_apply(const BernsteinFn& psi, const std::vector<double>& f, int dim, double period,
                                   Symbol symbol = Symbol::Continuum);

}  // namespace xtend
