#include <cmath>
#include <memory>
#include <numbers>

#include "doctest.h"
#include "xtend/canonical.hpp"
#include "xtend/error.hpp"
#include "xtend/extension_field.hpp"

using namespace xtend;
using std::numbers::pi;

namespace {

std::shared_ptr<const BernsteinFn> bern(const std::string& name) {
  return std::make_shared<const BernsteinFn>(std::make_shared<const KreinString>(canonical_string(name)));
}

std::shared_ptr<const DiscreteGenerator> torus(int n = 64) {
  return std::make_shared<const DiscreteGenerator>(discretize(DiffusionOperator1D::laplacian_torus(n, 2 * pi)));
}

Eigen::VectorXd trig(const DiscreteGenerator& L) {
  return sample(L, [](double x) { return std::cos(x) + 0.5 * std::cos(3 * x); });
}

// Cauchy (half-plane Poisson) kernel: the harmonic measure of the Lebesgue string.
double cauchy_cdf(double x, double y) { return 0.5 + std::atan(x / y) / pi; }

}  // namespace

TEST_CASE("y-grid parsing") {
  const KreinString c = canonical_string("casec:0.5");
  const auto g = parse_y_grid("geo:0:y1:10:1.5", c);
  CHECK(g.size() == 11);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[1] - g[0] < g[5] - g[4]);
  CHECK(g[10] - g[9] < g[6] - g[5]);
  const KreinString b1 = canonical_string("b1");
  CHECK(parse_y_grid("geo:0:y1:10:1.5", b1).back() < 1.0);
  const auto lin = parse_y_grid("lin:0:2:4", canonical_string("lebesgue"));
  CHECK(lin == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  CHECK_THROWS_AS(parse_y_grid("geo:0:y1:10:1.5", canonical_string("lebesgue")), Error);
  CHECK_THROWS_AS(parse_y_grid("cheb:0:1:3", c), Error);
  CHECK_THROWS_AS(parse_y_grid("lin:0:x:3", c), Error);
}

TEST_CASE("Lebesgue extension separates variables") {
  auto L = torus(32);
  const Eigen::VectorXd f = sample(*L, [](double x) { return std::cos(x); });
  const ExtensionSolution sol = extend(bern("lebesgue"), L, f, {0.0, 0.5, 1.0, 2.0});
  const double lam = L->lambdas()(1);  // discrete symbol of cos
  for (int j = 0; j < 4; ++j) {
    const double y = sol.y_grid()[static_cast<std::size_t>(j)];
    CHECK((sol.values().col(j) - std::exp(-std::sqrt(lam) * y) * f).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK((sol.values().col(0) - f).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dirichlet_to_neumann(sol) + std::sqrt(lam) * f).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("maximum principle on every canonical string") {
  auto L = torus(32);
  const Eigen::VectorXd f = trig(*L);
  for (const auto& name : canonical_names()) {
    auto psi = bern(name);
    const auto ys = parse_y_grid(psi->string().finite() ? "geo:0:y1:20:1.5" : "geo:0:3:20:1.5", psi->string());
    const ExtensionSolution sol = extend(psi, L, f, ys);
    CHECK(sol.values().maxCoeff() <= f.maxCoeff() + 1e-8);
    CHECK(sol.values().minCoeff() >= f.minCoeff() - 1e-8);
  }
}

TEST_CASE("DtoN equals -psi(-L) f on canonical strings") {
  auto L = torus(64);
  auto ou = std::make_shared<const DiscreteGenerator>(discretize(DiffusionOperator1D::ornstein_uhlenbeck(64)));
  for (const auto& name : canonical_names()) {
    auto psi = bern(name);
    for (const auto& G : {L, ou}) {
      const Eigen::VectorXd f = trig(*G);
      const ExtensionSolution sol = extend(psi, G, f, {0.0});
      const Eigen::VectorXd d = dirichlet_to_neumann(sol) - apply_psi_of_minus_L(*psi, *G, f);
      CHECK(d.cwiseAbs().maxCoeff() <= 1e-6 * f.cwiseAbs().maxCoeff());
      const FiniteDifferenceCheck fd = dton_finite_difference_check(sol);
      CHECK(fd.min_order() >= 1.0);
      CHECK(fd.extrapolant_errors.back() < fd.raw_errors.back());
    }
  }
}

TEST_CASE("sticky DtoN: d+phi(0) - m0 lambda = -psi mode-wise") {
  auto L = torus(32);
  auto psi = bern("sticky:0.7");
  const Eigen::VectorXd e = L->modes().col(3);
  const ExtensionSolution sol = extend(psi, L, e, {0.0});
  const double lam = L->lambdas()(3);
  CHECK((dirichlet_to_neumann(sol) + (*psi)(lam) * e).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((sol.neumann() - (-std::sqrt(lam)) * e).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("constant data on an unbounded string has zero DtoN") {
  auto L = torus(16);
  const ExtensionSolution sol = extend(bern("lebesgue"), L, Eigen::VectorXd::Ones(16), {0.0, 1.0});
  CHECK(dirichlet_to_neumann(sol).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("weak residual and its negative control") {
  auto L = torus(64);
  const Eigen::VectorXd f = trig(*L);
  for (const char* name : {"lebesgue", "casec:0.5"}) {
    auto psi = bern(name);
    const ExtensionSolution sol = extend(psi, L, f, {0.0});
    for (const Bump& g : bump_family(psi->string())) CHECK(weak_residual(sol, g, 1e-2) <= 1e-4);

    ModalField frozen = modal_field(sol);
    frozen.phi = [](std::size_t, double) { return 1.0; };
    CHECK(weak_residual(psi->string(), frozen, bump_family(psi->string())[0], 1e-2) > 1e-1);

    ModalField zero = modal_field(sol);
    Bump g = bump_family(psi->string())[0];
    CHECK(weak_residual(sol, g) >= 0.0);
  }
  auto psi = bern("lebesgue");
  const ExtensionSolution sol = extend(psi, L, f, {0.0});
  CHECK(weak_residual(sol, Bump{1.0, 0.5}) <= 1e-4);
  CHECK_THROWS_AS(weak_residual(sol, Bump{0.4, 0.5}), Error);
  auto c = bern("casec:0.5");
  const ExtensionSolution solc = extend(c, L, f, {0.0});
  CHECK_THROWS_AS(weak_residual(solc, Bump{0.6, 0.5}), Error);
}

TEST_CASE("derivative jump across an interior atom") {
  auto s = std::make_shared<const KreinString>(kInf, DensitySpec::constant(1.0), 0.0, 0.0,
                                               std::vector<PointMass>{{0.5, 2.0}});
  auto psi = std::make_shared<const BernsteinFn>(s);
  auto L = torus(32);
  const Eigen::VectorXd f = trig(*L);
  const ExtensionSolution sol = extend(psi, L, f, {0.0, 1.0});
  CHECK(forward_derivative_jump_check(sol, 0.25, 0.75) < 1e-6);
  CHECK(forward_derivative_jump_check(sol, 0.5, 0.75) < 1e-6);
  // The jump at the atom alone: d+u(0.5) - d-u(0.5) = 2 lambda u, mode-wise.
  const double eps = 1e-7;
  const Eigen::VectorXd jump = sol.dy_right(0.5) - sol.dy_right(0.5 - eps);
  const Eigen::VectorXd expected = -2.0 * L->apply(sol.at(0.5));
  CHECK((jump - expected).cwiseAbs().maxCoeff() < 1e-5 * expected.cwiseAbs().maxCoeff());

  const ExtensionSolution leb = extend(bern("lebesgue"), L, f, {0.0, 1.0});
  CHECK(forward_derivative_jump_check(leb, 0.1, 0.9) < 1e-6 * f.cwiseAbs().maxCoeff());
  const ExtensionSolution flat = extend(bern("lebesgue"), L, Eigen::VectorXd::Ones(32), {0.0, 1.0});
  CHECK(forward_derivative_jump_check(flat, 0.1, 0.9) < 1e-14);
}

TEST_CASE("boundary behaviour by case") {
  auto L = torus(32);
  const Eigen::VectorXd f = trig(*L) + Eigen::VectorXd::Constant(32, 0.3);
  const BoundaryReport a = boundary_behavior_check(extend(bern("lebesgue"), L, f, {0.0}));
  CHECK_FALSE(a.applicable);
  CHECK(a.condition == "no y1 condition applies");

  const BoundaryReport c = boundary_behavior_check(extend(bern("casec:0.5"), L, f, {0.0}));
  CHECK(c.applicable);
  CHECK(c.residual <= 1e-6);
  CHECK(c.pass);

  for (const char* name : {"b1", "b2"}) {
    const BoundaryReport b = boundary_behavior_check(extend(bern(name), L, f, {0.0}));
    CHECK(b.applicable);
    CHECK(b.decreasing);
    CHECK(b.sup_values.back() < 1e-3);
    CHECK(b.pass);
  }
}

TEST_CASE("harmonic measure: Cauchy law, killed mass, concentration") {
  auto leb = bern("lebesgue");
  const HarmonicMeasure hm(*leb, 1.0);
  CHECK(hm.mass() == doctest::Approx(1.0).epsilon(1e-12));
  double total = 0.0;
  for (double v : hm.values()) total += v;
  CHECK(total * (hm.x()[1] - hm.x()[0]) == doctest::Approx(hm.mass()).epsilon(1e-8));
  for (double x : {-5.0, -1.0, 0.0, 0.3, 2.0, 10.0}) {
    CHECK(hm.density(x) == doctest::Approx(1.0 / (pi * (1.0 + x * x))).epsilon(2e-3));
    CHECK(std::abs(hm.cdf(x) - cauchy_cdf(x, 1.0)) < 2e-3);
  }

  auto fin = bern("finite:2");
  const HarmonicMeasure hf(*fin, 1.0);
  CHECK(hf.mass() == doctest::Approx(0.5).epsilon(1e-12));
  double tf = 0.0;
  for (double v : hf.values()) tf += v;
  CHECK(tf * (hf.x()[1] - hf.x()[0]) == doctest::Approx(0.5).epsilon(1e-8));

  auto iqr = [&](double y) {
    const HarmonicMeasure h(*leb, y, 200.0, 14);
    double lo = -100, hi = 0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (h.cdf(mid) < 0.25) lo = mid; else hi = mid;
    }
    return -2.0 * lo;
  };
  CHECK(iqr(0.1) < iqr(0.5));
  CHECK(iqr(0.5) < iqr(1.0));

  const auto d = harmonic_measure_density(*leb, 1.0, {0.0});
  CHECK(d[0] == doctest::Approx(1.0 / pi).epsilon(2e-3));
}
