#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "xtend/canonical.hpp"
#include "xtend/error.hpp"
#include "xtend/stochastic_lab.hpp"

using namespace xtend;

namespace {

constexpr double pi = std::numbers::pi;

KreinString named(const char* name) { return canonical_string(name); }

DiffusionOperator1D laplacian() { return DiffusionOperator1D::laplacian_torus(64, 2 * pi); }

PathConfig config(std::size_t n, std::uint64_t seed = 7) {
  PathConfig c;
  c.n_paths = n;
  c.master_seed = seed;
  return c;
}

bool within(double estimate, double se, double exact, double k = 3.0) { return std::abs(estimate - exact) <= k * se; }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_error(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

TEST_CASE("configuration and seeding") {
  PathConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.bandwidth() == doctest::Approx(std::pow(1e-4, 0.4)));
  c.epsilon = 1e-3;  // below sqrt(dt) / 4
  CHECK_THROWS_AS(c.validate(), Error);
  c = PathConfig{};
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);

  CHECK(path_seed(1, 0, kStreamY) != path_seed(1, 0, kStreamX));
  CHECK(path_seed(1, 0, kStreamX) != path_seed(1, 1, kStreamY));
  CHECK(path_seed(1, 5, kStreamY) != path_seed(2, 5, kStreamY));
  CHECK(path_seed(9, 3, kStreamX) == path_seed(9, 3, kStreamX));
}

TEST_CASE("time-change paths respect their invariants") {
  PathConfig c = config(1);
  c.horizon = 2.0;
  for (const char* name : {"lebesgue", "sticky:0.7", "power:0.5", "casec:0.5", "b1"}) {
    const KreinString s = named(name);
    for (std::uint64_t i = 0; i < 20; ++i) {
      const StringDiffusionPath p = simulate_Y_time_change(s, c, 0.0, i);
      REQUIRE(p.time.size() == p.y.size());
      for (std::size_t k = 1; k < p.time.size(); ++k) {
        CHECK(p.time[k] >= p.time[k - 1]);
        CHECK(p.l0[k] >= p.l0[k - 1]);
        CHECK(p.l1[k] >= p.l1[k - 1]);
        CHECK(p.y[k] >= 0.0);
        CHECK(p.y[k] <= s.y1());
        // Local time grows only while the path sits inside the bandwidth window at 0.
        if (p.l0[k] > p.l0[k - 1]) CHECK(std::min(p.y[k], p.y[k - 1]) < c.bandwidth());
      }
      if (p.absorbed_at) {
        CHECK(p.saturated);
        CHECK(p.y.back() == s.y1());
      }
      // The clock reaches the horizon to within one step unless the path was absorbed first.
      if (!p.saturated) {
        const double last_step = p.time.back() - p.time[p.time.size() - 2];
        CHECK(std::abs(p.time.back() - c.horizon) <= std::max(last_step, 1e-3 * c.dt));
      }
    }
  }
}

TEST_CASE("sticky origin holds the path at zero") {
  PathConfig c = config(1);
  c.horizon = 1.0;
  double occ_sticky = 0.0, occ_plain = 0.0;
  const int n = 400;
  const double eps = 0.01;
  for (int i = 0; i < n; ++i) {
    const auto ps = simulate_Y_time_change(named("sticky:0.7"), c, 0.0, i);
    const auto pl = simulate_Y_time_change(named("lebesgue"), c, 0.0, i);
    for (std::size_t k = 1; k < ps.time.size(); ++k)
      if (ps.y[k] < eps) occ_sticky += ps.time[k] - ps.time[k - 1];
    for (std::size_t k = 1; k < pl.time.size(); ++k)
      if (pl.y[k] < eps) occ_plain += pl.time[k] - pl.time[k - 1];
  }
  CHECK(occ_sticky / n > 0.1);
  CHECK(occ_sticky > 5.0 * occ_plain);
}

TEST_CASE("absorbing ends") {
  PathConfig c = config(1);
  c.horizon = 50.0;
  int b1_absorbed = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto p2 = simulate_Y_time_change(named("b2"), c, 0.5, i);
    CHECK_FALSE(p2.absorbed_at.has_value());
    const auto p1 = simulate_Y_time_change(named("b1"), c, 0.5, i);
    if (p1.absorbed_at) {
      ++b1_absorbed;
      CHECK(*p1.absorbed_at < kInf);
    }
  }
  CHECK(b1_absorbed > 0);
}

TEST_CASE("inverse local time") {
  PathConfig c = config(1);
  c.horizon = 5.0;
  const auto p = simulate_Y_time_change(named("lebesgue"), c, 0.0, 3);
  CHECK(inverse_local_time(p, 0.0) == 0.0);
  const double level = 0.5 * p.l0.back();
  const double T = inverse_local_time(p, level);
  CHECK(T > 0.0);
  CHECK(T <= p.time.back());
  CHECK(inverse_local_time(p, 0.25 * p.l0.back()) <= T);
  CHECK_THROWS_AS(inverse_local_time(p, 10.0 * p.l0.back() + 1.0), Error);
  CHECK_THROWS_AS(inverse_local_time(p, -1.0), Error);

  c.horizon = 1e6;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto killed = simulate_Y_time_change(named("finite:2"), c, 0.0, i);
    REQUIRE(killed.saturated);
    CHECK(inverse_local_time(killed, killed.l0.back() + 1.0) == kInf);
  }
}

TEST_CASE("reflected SDE backend") {
  PathConfig c = config(1);
  c.horizon = 1.0;
  CHECK_THROWS_AS(simulate_Y_reflected_sde(named("sticky:0.7"), c, 0.0), Error);
  CHECK_THROWS_AS(simulate_Y_reflected_sde(named("casec:0.5"), c, 0.0), Error);
  CHECK_THROWS_AS(simulate_Y_reflected_sde(named("b1"), c, 0.0), Error);

  const KreinString box(1.0, DensitySpec::constant(1.0));
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto p = simulate_Y_reflected_sde(box, c, 0.3, i);
    for (double y : p.y) {
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
    }
  }

  // Both backends estimate E[L0 at time 1]; for the Lebesgue string it equals
  // E[L0 of standard Brownian motion at time 2] = sqrt(4/pi).
  for (const KreinString& s : {named("lebesgue"), box}) {
    std::vector<double> tc, sde;
    for (std::uint64_t i = 0; i < 3000; ++i) {
      tc.push_back(simulate_Y_time_change(s, c, 0.0, i).l0.back());
      sde.push_back(simulate_Y_reflected_sde(s, c, 0.0, i + 100000).l0.back());
    }
    const double joint = std::hypot(std_error(tc), std_error(sde));
    CHECK(std::abs(mean(tc) - mean(sde)) <= 3.0 * joint);
    if (!s.finite()) CHECK(within(mean(tc), std_error(tc), std::sqrt(4.0 / pi)));
  }
}

TEST_CASE("occupation bandwidth sensitivity") {
  PathConfig c = config(2000);
  const BandwidthReport rep = bandwidth_sensitivity(named("lebesgue"), c, 0.0, 1.0);
  REQUIRE(rep.occupation.size() == 3);
  for (double v : rep.occupation) CHECK(std::abs(v - rep.exact) < 0.05 * rep.exact);
}

TEST_CASE("driving diffusion X") {
  PathConfig c = config(1);
  std::vector<double> brown, ou;
  const DiffusionOperator1D lap = laplacian();
  const DiffusionOperator1D o = DiffusionOperator1D::ornstein_uhlenbeck(64);
  c.dt = 1e-2;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    brown.push_back(simulate_X(lap, 1.0, {0.5}, c, i).states[0]);
    ou.push_back(simulate_X(o, 3.0, {6.0}, c, i).states[0]);
  }
  auto variance = [](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  // Variance estimators: se of s^2 is about s^2 sqrt(2 / n).
  const double se_b = 1.0 * std::sqrt(2.0 / 4000.0);
  CHECK(within(variance(brown), se_b, 1.0));
  CHECK(within(mean(brown), std::sqrt(1.0 / 4000.0), 1.0));
  CHECK(within(variance(ou), std::sqrt(2.0 / 4000.0), 1.0 - std::exp(-12.0), 3.5));

  const DiffusionOperator1D drift{Domain::Interval, Expression::constant(1.0), Expression::constant(0.0), -5, 5, 16};
  const XPath d = simulate_X(drift, 0.25, {0.5, 1.0, 1.0, 2.5}, c);
  CHECK(d.states[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(d.states[3] == doctest::Approx(2.75).epsilon(1e-14));
  CHECK_FALSE(d.blowup);
  CHECK_THROWS_AS(simulate_X(drift, 0.0, {1.0, 0.5}, c), Error);

  const DiffusionOperator1D explode{Domain::Interval, Expression::parse("x^3"), Expression::constant(0.0), -5, 5, 16};
  CHECK(simulate_X(explode, 2.0, {10.0}, c, 0, 1e6).blowup);
}

TEST_CASE("hitting times calibrate the clock") {
  const auto samples = sample_hitting(named("lebesgue"), 0.5, config(20000));
  for (double lambda : {1.0, 4.0}) {
    const Estimate e = hitting_laplace(samples, lambda);
    CHECK(within(e.mean, e.se, std::exp(-std::sqrt(lambda) * 0.5)));
  }
  const Estimate near = hitting_laplace(sample_hitting(named("lebesgue"), 1e-4, config(2000)), 1.0);
  CHECK(near.mean > 0.99);

  const auto b1 = std::make_shared<const KreinString>(named("b1"));
  const double psi0 = BernsteinFn(b1).psi0();
  const Estimate reach = hitting_laplace(sample_hitting(*b1, 0.5, config(20000)), 0.0);
  CHECK(within(reach.mean, reach.se, 1.0 - 0.5 * psi0));
  CHECK(reach.kill_rate > 0.0);
  CHECK_THROWS_AS(sample_hitting(*b1, 1.0, config(10)), Error);
}

TEST_CASE("subordinator Laplace exponent and killing") {
  const Estimate e = estimate_subordinator_laplace(named("lebesgue"), 0.25, 1.0, config(20000));
  CHECK(within(e.mean, e.se, std::exp(-0.25)));
  CHECK(e.kill_rate == 0.0);

  const Estimate conservative = estimate_subordinator_laplace(named("lebesgue"), 0.25, 0.0, config(2000));
  CHECK(conservative.mean == 1.0);

  const auto b1 = std::make_shared<const KreinString>(named("b1"));
  const double psi0 = BernsteinFn(b1).psi0();
  for (double t : {0.1, 0.25}) {
    const Estimate k = estimate_subordinator_laplace(*b1, t, 0.0, config(20000));
    CHECK(within(k.mean, k.se, std::exp(-t * psi0)));
    CHECK(k.censor_rate < 0.01);
  }
}

TEST_CASE("trace process generator") {
  const DiffusionOperator1D lap = laplacian();
  auto cosine = [](double x) { return std::cos(x); };
  auto one = [](double) { return 1.0; };

  const Estimate flat = sample_trace(named("lebesgue"), lap, one, 0.0, 0.02, config(5000));
  CHECK(flat.mean == 0.0);

  const double t = 0.04;
  const Estimate e = sample_trace(named("lebesgue"), lap, cosine, 0.0, t, config(100000));
  CHECK(within(e.mean, e.se, (std::exp(-t) - 1.0) / t));

  const auto b1 = std::make_shared<const KreinString>(named("b1"));
  const double psi0 = BernsteinFn(b1).psi0();
  const Estimate kill = sample_trace(*b1, lap, one, 0.0, 0.02, config(20000));
  CHECK(within(kill.mean, kill.se, (std::exp(-0.02 * psi0) - 1.0) / 0.02));
  CHECK(kill.kill_rate > 0.0);
}

TEST_CASE("harmonic measure of the trace") {
  const DiffusionOperator1D lap = laplacian();
  const auto leb = std::make_shared<const KreinString>(named("lebesgue"));
  const HarmonicEstimate h = estimate_harmonic_measure(BernsteinFn(leb), lap, 0.0, 1.0, config(10000));
  CHECK(h.ks <= 0.02);
  CHECK(h.alive_mass == 1.0);

  const HarmonicEstimate narrow = estimate_harmonic_measure(BernsteinFn(leb), lap, 0.5, 0.01, config(2000));
  CHECK(std::abs(narrow.samples[narrow.samples.size() / 2] - 0.5) < 0.05);

  const auto fin = std::make_shared<const KreinString>(named("finite:2"));
  const HarmonicEstimate f = estimate_harmonic_measure(BernsteinFn(fin), lap, 0.0, 1.0, config(10000));
  CHECK(within(f.alive_mass, f.alive_se, 0.5));
  // Killed fraction against the deficit of the spectral harmonic measure.
  CHECK(within(1.0 - f.alive_mass, f.alive_se, 1.0 - f.reference_mass));

  const DiffusionOperator1D ou = DiffusionOperator1D::ornstein_uhlenbeck(64);
  CHECK_THROWS_AS(estimate_harmonic_measure(BernsteinFn(leb), ou, 0.0, 1.0, config(10)), Error);
}

TEST_CASE("Dynkin residual of the extension") {
  const auto s = std::make_shared<const KreinString>(named("lebesgue"));
  const DiffusionOperator1D op = laplacian();
  const auto L = std::make_shared<const DiscreteGenerator>(discretize(op));
  const ExtensionSolution sol =
      extend(std::make_shared<const BernsteinFn>(s), L, sample(*L, [](double x) { return std::cos(x); }), {0.0, 1.0});
  const FieldContext u = field_context(sol);
  CHECK(u.u(0.3, 0.7) == doctest::Approx(std::exp(-0.7) * std::cos(0.3)).epsilon(1e-3));
  CHECK(u.flux(0.3) == doctest::Approx(-std::cos(0.3)).epsilon(1e-3));

  const DynkinResult d = dynkin_residual(*s, op, u, 0.0, 0.5, config(10000));
  CHECK(std::abs(d.residual) <= 3.0 * d.se + 1e-2);
  CHECK(std::abs(d.control) > 3.0 * d.control_se);
  CHECK(d.control == doctest::Approx(d.residual - d.mean_local_time).epsilon(1e-9));

  const DynkinResult zero = dynkin_residual(*s, op, u, 0.0, 0.0, config(10));
  CHECK(zero.residual == 0.0);
  CHECK_THROWS_AS(dynkin_residual(named("b1"), op, u, 0.0, 0.5, config(10)), Error);
}

TEST_CASE("estimates are reproducible and thread-count independent") {
  const DiffusionOperator1D lap = laplacian();
  auto cosine = [](double x) { return std::cos(x); };
  setenv("XTEND_THREADS", "1", 1);
  const Estimate a = sample_trace(named("sticky:0.7"), lap, cosine, 0.0, 0.02, config(3000, 99));
  setenv("XTEND_THREADS", "3", 1);
  const Estimate b = sample_trace(named("sticky:0.7"), lap, cosine, 0.0, 0.02, config(3000, 99));
  unsetenv("XTEND_THREADS");
  CHECK(a.mean == b.mean);
  CHECK(a.se == b.se);
  const Estimate c = sample_trace(named("sticky:0.7"), lap, cosine, 0.0, 0.02, config(3000, 100));
  CHECK(c.mean != a.mean);
}
