#include <chrono>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "xtend/error.hpp"
#include "xtend/krein_solver.hpp"

using namespace xtend;

namespace {

// Lebesgue density on [0, 1] with an atom m1 at 1 and Neumann closure beyond.
double casec_lebesgue_oracle(double lambda, double m1) {
  const double k = std::sqrt(lambda);
  const double c = lambda * m1 / k;
  return k * (std::sinh(k) + c * std::cosh(k)) / (std::cosh(k) + c * std::sinh(k));
}

// RK4 on f'' = lambda * rho(y) f from y = a to b, state (f, f').
std::pair<double, double> rk4(double lambda, double (*rho)(double), double f, double p, double a, double b, int n) {
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double y = a + i * h;
    const double k1f = p, k1p = lambda * rho(y) * f;
    const double k2f = p + 0.5 * h * k1p, k2p = lambda * rho(y + 0.5 * h) * (f + 0.5 * h * k1f);
    const double k3f = p + 0.5 * h * k2p, k3p = lambda * rho(y + 0.5 * h) * (f + 0.5 * h * k2f);
    const double k4f = p + h * k3p, k4p = lambda * rho(y + h) * (f + h * k3f);
    f += h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f);
    p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  }
  return {f, p};
}

double rho_linear(double y) { return 1.0 + y; }

}  // namespace

TEST_CASE("Lebesgue psi is sqrt(lambda)") {
  KreinString s(kInf, DensitySpec::constant(1.0));
  for (double l : {0.1, 1.0, 4.0, 25.0, 100.0}) {
    const PsiValue v = psi(s, l);
    CHECK(std::abs(v.value / std::sqrt(l) - 1.0) < 1e-6);
    CHECK(v.lo <= v.hi);
  }
}

TEST_CASE("sticky origin adds m0 lambda exactly") {
  KreinString s(kInf, DensitySpec::constant(1.0), 0.7);
  for (double l : {0.5, 3.0, 1e6}) {
    CHECK(psi(s, l).value == doctest::Approx(0.7 * l + std::sqrt(l)).epsilon(1e-7));
  }
}

TEST_CASE("Dirichlet end at R gives sqrt(l) coth(sqrt(l) R)") {
  for (double R : {0.5, 1.0, 2.0}) {
    KreinString s(R, DensitySpec::constant(1.0), 0.0, 0.0, {}, true);
    CHECK(psi(s, 0.0).value == doctest::Approx(1.0 / R).epsilon(1e-14));
    const double k = std::sqrt(3.0);
    CHECK(psi(s, 3.0).value == doctest::Approx(k / std::tanh(k * R)).epsilon(1e-7));
  }
}

TEST_CASE("finite-mass end matches the Neumann-with-atom oracle") {
  KreinString s(1.0, DensitySpec::constant(1.0), 0.0, 0.5);
  for (double l : {0.5, 1.0, 5.0}) {
    CHECK(psi(s, l).value == doctest::Approx(casec_lebesgue_oracle(l, 0.5)).epsilon(1e-7));
    CHECK(case_c_residual(s, l) < 1e-6);
  }
  KreinString a(kInf, DensitySpec::constant(1.0));
  CHECK_THROWS_AS(case_c_residual(a, 1.0), Error);
}

TEST_CASE("linear density matches an RK4 shooting oracle on a Dirichlet string") {
  // rho = 1 + y on [0, 1], Dirichlet at 1: psi = -f'(0)/f(0) for the solution vanishing at 1.
  std::vector<double> gy, gv;
  for (int i = 0; i <= 400; ++i) {
    gy.push_back(i / 400.0);
    gv.push_back(1.0 + gy.back());
  }
  KreinString s(1.0, DensitySpec::grid(gy, gv), 0.0, 0.0, {}, true);
  const double l = 2.0;
  auto [fN, pN] = rk4(l, rho_linear, 1.0, 0.0, 0.0, 1.0, 20000);
  auto [fD, pD] = rk4(l, rho_linear, 0.0, 1.0, 0.0, 1.0, 20000);
  (void)pN;
  (void)pD;
  CHECK(psi(s, l).value == doctest::Approx(fN / fD).epsilon(1e-7));
}

TEST_CASE("scaling law psi_{c m}(l) = psi_m(c l)") {
  KreinString m(kInf, DensitySpec::power(0.5));
  KreinString cm(kInf, DensitySpec::power(0.5, 3.0));
  for (double l : {0.2, 2.0, 20.0}) {
    CHECK(psi(cm, l).value == doctest::Approx(psi(m, 3.0 * l).value).epsilon(1e-6));
  }
}

TEST_CASE("power string psi is a power of lambda") {
  KreinString m(kInf, DensitySpec::power(0.5));
  const double r = psi(m, 16.0).value / psi(m, 1.0).value;
  CHECK(std::log(r) / std::log(16.0) == doctest::Approx(1.0 / 1.5).epsilon(1e-6));
}

TEST_CASE("absorbing end: psi(0) = 1/R and convergence for B1, B2") {
  KreinString b1(1.0, DensitySpec::boundary_power(1.5));
  KreinString b2(1.0, DensitySpec::boundary_power(2.0));
  CHECK(psi(b1, 0.0).value == 1.0);
  CHECK(psi(b2, 0.0).value == 1.0);
  const double v1 = psi(b1, 1.0).value;
  const double v2 = psi(b2, 1.0).value;
  CHECK(v1 > 1.0);
  CHECK(v2 > 1.0);
  PsiOptions loose;
  loose.tol = 1e-5;
  CHECK(psi(b1, 1.0, loose).value == doctest::Approx(v1).epsilon(1e-5));
}

TEST_CASE("Wronskian equals one and bracket tightens") {
  KreinString s(kInf, DensitySpec::constant(1.0), 0.7, 0.0, {{0.5, 0.2}});
  MeshSpec mesh;
  mesh.h = 0.01;
  mesh.y_end = 10.0;
  const AtomicString a = atomize(s, mesh);
  for (double l : {0.0, 1.0, 10.0}) {
    const FundamentalPair fp = solve_pair(a, l, 10.0);
    for (std::size_t j = 0; j < fp.size(); ++j) CHECK(fp.wronskian_defect(j) < 1e-10);
    for (std::size_t j = 2; l > 0 && j < fp.size(); ++j) {
      CHECK(fp.upper(j) <= fp.upper(j - 1) * (1 + 1e-15));
      CHECK(fp.lower(j) >= fp.lower(j - 1) * (1 - 1e-15));
      CHECK(fp.lower(j) <= fp.upper(j) * (1 + 1e-14));
    }
  }
}

TEST_CASE("Lebesgue profile is exp(-sqrt(l) y)") {
  auto s = std::make_shared<const KreinString>(kInf, DensitySpec::constant(1.0));
  const ModeProfile p = mode_profile(s, 4.0, 3.0);
  for (double y : {0.1, 0.5, 1.0, 3.0}) CHECK(p.phi(y) == doctest::Approx(std::exp(-2.0 * y)).epsilon(1e-6));
  CHECK(p.dphi_zero() == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(dphi_forward(*s, 4.0, 1.0) == doctest::Approx(-2.0 * std::exp(-2.0)).epsilon(1e-5));
  CHECK(phi(*s, 0.0, 5.0) == 1.0);
}

TEST_CASE("sticky profile: right derivative at zero is -psi + l m0") {
  auto s = std::make_shared<const KreinString>(kInf, DensitySpec::constant(1.0), 0.7);
  const ModeProfile p = mode_profile(s, 4.0, 1.0);
  CHECK(p.dphi_zero() == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(p.phi(1.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
}

TEST_CASE("Bernstein diagnostics accept psi and flag a non-Bernstein table") {
  auto s = std::make_shared<const KreinString>(kInf, DensitySpec::power(0.5), 0.3);
  BernsteinFn f(s);
  std::vector<double> ls;
  for (int i = 0; i < 12; ++i) ls.push_back(std::pow(10.0, -2.0 + 0.4 * i));
  std::vector<double> vs;
  for (const auto& v : f.evaluate_grid(ls)) vs.push_back(v.value);
  const DiagnosticsReport rep = bernstein_diagnostics(ls, vs, 0.3, 1e-6);
  CHECK(rep.pass());
  CHECK(rep.slope_gap >= 0.0);

  std::vector<double> bad;
  for (double l : ls) bad.push_back(l * l);
  CHECK_FALSE(bernstein_diagnostics(ls, bad).pass());
  std::vector<double> lin;
  for (double l : ls) lin.push_back(2.0 * l);
  CHECK(bernstein_diagnostics(ls, lin).ratio_constant);
}

TEST_CASE("PhiTable interpolates Lebesgue profile") {
  auto s = std::make_shared<const KreinString>(kInf, DensitySpec::constant(1.0));
  BernsteinFn f(s);
  PhiTable t(f, 1.0, 1e3, 40);
  for (double l : {0.0, 0.01, 0.7, 3.3, 50.0, 400.0}) {
    CHECK(t(l) == doctest::Approx(std::exp(-std::sqrt(l))).epsilon(1e-5));
  }
}

TEST_CASE("Lebesgue criterion runs well under five seconds") {
  KreinString s(kInf, DensitySpec::constant(1.0));
  const auto t0 = std::chrono::steady_clock::now();
  for (double l : {0.1, 1.0, 4.0, 25.0, 100.0}) (void)psi(s, l);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
}
