#include <cmath>
#include <memory>
#include <numbers>

#include "doctest.h"
#include "xtend/error.hpp"
#include "xtend/expression.hpp"
#include "xtend/operator_calculus.hpp"

using namespace xtend;
using std::numbers::pi;

namespace {

std::shared_ptr<const KreinString> lebesgue() {
  return std::make_shared<const KreinString>(kInf, DensitySpec::constant(1.0));
}

}  // namespace

TEST_CASE("expression parser") {
  CHECK(Expression::parse("1 + 2*3")(0.0) == 7.0);
  CHECK(Expression::parse("-x^2")(3.0) == -9.0);
  CHECK(Expression::parse("2^3^2")(0.0) == 512.0);
  CHECK(Expression::parse("sqrt(2)*cos(pi*x)")(1.0) == doctest::Approx(-std::sqrt(2.0)));
  CHECK(Expression::parse("1e-3*x")(2.0) == doctest::Approx(2e-3));
  CHECK_THROWS_AS(Expression::parse("foo(x)"), Error);
  CHECK_THROWS_AS(Expression::parse("(1+x"), Error);
  CHECK_THROWS_AS(Expression::parse("1 2"), Error);
}

TEST_CASE("torus Laplacian spectrum is the circulant one") {
  const int n = 64;
  const DiscreteGenerator L = discretize(DiffusionOperator1D::laplacian_torus(n, 2 * pi));
  const double h = 2 * pi / n;
  std::vector<double> expected;
  for (int k = 0; k < n; ++k) expected.push_back((2.0 - 2.0 * std::cos(k * h)) / (h * h));
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < n; ++k) CHECK(L.lambdas()(k) == doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-10));
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
  CHECK((L.apply(one)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("OU spectrum is real, nonpositive, near 0, -1, -2") {
  const DiscreteGenerator L = discretize(DiffusionOperator1D::ornstein_uhlenbeck(64));
  CHECK(L.lambdas()(0) == 0.0);
  CHECK(L.lambdas()(1) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(L.lambdas()(2) == doctest::Approx(2.0).epsilon(0.03));
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(64);
  CHECK(L.apply(one).cwiseAbs().maxCoeff() < 1e-10);
  // Weighted orthonormality.
  const Eigen::MatrixXd G = L.modes().transpose() * L.weight().asDiagonal() * L.modes();
  CHECK((G - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("non-gradient drift on the torus is rejected") {
  DiffusionOperator1D op = DiffusionOperator1D::laplacian_torus(32, 2 * pi);
  op.drift = Expression::constant(1.0);
  CHECK_THROWS_AS(discretize(op), Error);
  op.drift = Expression::parse("sin(x)");
  CHECK_NOTHROW(discretize(op));
}

TEST_CASE("identity symbol reproduces -L f") {
  const DiscreteGenerator L = discretize(DiffusionOperator1D::ornstein_uhlenbeck(48));
  const Eigen::VectorXd f = sample(L, [](double x) { return std::cos(x) + 0.3 * x; });
  const Eigen::VectorXd a = L.spectral_apply(f, [](double l) { return -l; });
  CHECK((a - L.apply(f)).cwiseAbs().maxCoeff() < 1e-12 * L.apply(f).cwiseAbs().maxCoeff() * 10);
}

TEST_CASE("-psi(-L) on eigenvectors, constants and finite strings") {
  const DiscreteGenerator L = discretize(DiffusionOperator1D::laplacian_torus(64, 2 * pi));
  BernsteinFn leb(lebesgue());
  // An eigenvector with lambda = 4 in the continuum: use the discrete eigenvalue.
  Eigen::VectorXd e = L.modes().col(7);
  const double lam = L.lambdas()(7);
  const Eigen::VectorXd r = apply_psi_of_minus_L(leb, L, e);
  CHECK((r + std::sqrt(lam) * e).cwiseAbs().maxCoeff() < 1e-6 * e.cwiseAbs().maxCoeff());

  const Eigen::VectorXd one = Eigen::VectorXd::Ones(64);
  CHECK(apply_psi_of_minus_L(leb, L, one).cwiseAbs().maxCoeff() < 1e-12);

  BernsteinFn fin(std::make_shared<const KreinString>(2.0, DensitySpec::constant(1.0), 0.0, 0.0,
                                                      std::vector<PointMass>{}, true));
  const Eigen::VectorXd c = apply_psi_of_minus_L(fin, L, one);
  CHECK((c.array() + 0.5).abs().maxCoeff() < 1e-10);
}

TEST_CASE("psi(-L) is self-adjoint in the weighted inner product") {
  const DiscreteGenerator L = discretize(DiffusionOperator1D::ornstein_uhlenbeck(64));
  BernsteinFn p(std::make_shared<const KreinString>(kInf, DensitySpec::power(0.5), 0.2));
  const Eigen::VectorXd f = sample(L, [](double x) { return std::cos(x); });
  const Eigen::VectorXd g = sample(L, [](double x) { return std::exp(-x * x) + x; });
  const double a = L.inner(apply_psi_of_minus_L(p, L, f), g);
  const double b = L.inner(f, apply_psi_of_minus_L(p, L, g));
  CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
}

TEST_CASE("heat semigroup") {
  const DiscreteGenerator L = discretize(DiffusionOperator1D::ornstein_uhlenbeck(48));
  const Eigen::VectorXd f = sample(L, [](double x) { return std::sin(x); });
  CHECK((heat_semigroup_apply(L, 0.0, f) - f).cwiseAbs().maxCoeff() < 1e-11);
  const Eigen::VectorXd e = L.modes().col(3);
  CHECK((heat_semigroup_apply(L, 1.0, e) - std::exp(-L.lambdas()(3)) * e).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(48);
  CHECK((heat_semigroup_apply(L, 3.0, one) - one).cwiseAbs().maxCoeff() < 1e-10);
  // Contraction in the weighted norm.
  const Eigen::VectorXd pf = heat_semigroup_apply(L, 0.5, f);
  CHECK(L.inner(pf, pf) <= L.inner(f, f));
}

TEST_CASE("subordination identity mode by mode with exact gamma samples") {
  // Lebesgue psi: T_t is the 1/2-stable subordinator with E exp(-l T_t) = exp(-t sqrt l);
  // its law is Levy with scale t^2/2, sampled exactly as t^2 / (2 Z^2).
  const DiscreteGenerator L = discretize(DiffusionOperator1D::laplacian_torus(16, 2 * pi));
  BernsteinFn leb(lebesgue());
  std::vector<double> taus;
  const double t = 0.3;
  for (int i = 1; i < 4000; ++i) {
    const double u = (i - 0.5) / 4000.0;
    // Z quantile of a standard half-normal via erfinv surrogate: bisection on erf.
    double lo = 0.0, hi = 10.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (std::erf(mid / std::sqrt(2.0)) < u) lo = mid; else hi = mid;
    }
    const double z = 0.5 * (lo + hi);
    taus.push_back(t * t / (2.0 * z * z));
  }
  const Eigen::VectorXd e = L.modes().col(2);
  const Eigen::VectorXd mixed = mixed_semigroup_apply(L, taus, e);
  const Eigen::VectorXd exact = subordinate_semigroup_apply(leb, L, t, e);
  CHECK((mixed - exact).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("Fourier symbol application") {
  BernsteinFn leb(lebesgue());
  const int n = 32;
  std::vector<double> f(n), one(n, 1.0);
  for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = std::cos(2 * pi * i / n);
  const FourierResult r = fourier_symbol_apply(leb, f, 1, 2 * pi);
  for (int i = 0; i < n; ++i) CHECK(r.values[static_cast<std::size_t>(i)] == doctest::Approx(-f[static_cast<std::size_t>(i)]).epsilon(1e-6));
  CHECK(r.discrete_gap > 0.0);
  CHECK(r.discrete_gap < (2 * pi / n) * (2 * pi / n));
  for (double v : fourier_symbol_apply(leb, one, 1, 2 * pi).values) CHECK(std::abs(v) < 1e-12);

  std::vector<double> f2(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      f2[static_cast<std::size_t>(i * n + j)] = std::cos(2 * pi * i / n) * std::cos(2 * pi * j / n);
  const FourierResult r2 = fourier_symbol_apply(leb, f2, 2, 2 * pi);
  for (std::size_t k = 0; k < f2.size(); ++k) CHECK(r2.values[k] == doctest::Approx(-std::sqrt(2.0) * f2[k]).epsilon(1e-6));

  // Discrete symbol agrees with the matrix calculus on the torus Laplacian.
  const DiscreteGenerator L = discretize(DiffusionOperator1D::laplacian_torus(n, 2 * pi));
  Eigen::VectorXd fv(n);
  for (int i = 0; i < n; ++i) fv(i) = f[static_cast<std::size_t>(i)] + 0.5 * std::cos(3 * 2 * pi * i / n);
  const Eigen::VectorXd m = apply_psi_of_minus_L(leb, L, fv);
  const FourierResult rd = fourier_symbol_apply(leb, std::vector<double>(fv.data(), fv.data() + n), 1, 2 * pi, Symbol::Discrete);
  for (int i = 0; i < n; ++i) CHECK(rd.values[static_cast<std::size_t>(i)] == doctest::Approx(m(i)).epsilon(1e-7));
}
