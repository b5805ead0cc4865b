#include <cmath>

#include "doctest.h"
#include "xtend/error.hpp"
#include "xtend/string_model.hpp"

using namespace xtend;

TEST_CASE("Lebesgue string has infinite reach and classifies as A") {
  KreinString s(kInf, DensitySpec::constant(1.0));
  CHECK(s.R() == kInf);
  CHECK(classify(s).variant == StringCase::CaseA);
  CHECK(s.ac_mass(0.0, 2.5) == doctest::Approx(2.5));
  CHECK(s.cumulative(3.0) == doctest::Approx(3.0));
}

TEST_CASE("infinite_beyond encodes R = y1") {
  KreinString s(2.0, DensitySpec::constant(1.0), 0.0, 0.0, {}, true);
  CHECK(s.R() == 2.0);
  CHECK(classify(s).variant == StringCase::CaseB1);
}

TEST_CASE("boundary power classification follows both integrals") {
  KreinString b1(1.0, DensitySpec::boundary_power(1.5));
  KreinString b2(1.0, DensitySpec::boundary_power(2.0));
  KreinString c(1.0, DensitySpec::constant(1.0), 0.0, 0.5);
  CHECK(classify(b1).variant == StringCase::CaseB1);
  CHECK(classify(b2).variant == StringCase::CaseB2);
  CHECK(classify(c).variant == StringCase::CaseC);
  CHECK(classify(c).total_mass == doctest::Approx(1.5));
  // (1-y)^{-3/2} integrated against (1-y) on (0,1) is 2.
  CHECK(classify(b1).moment == doctest::Approx(2.0));
  CHECK(b1.R() == 1.0);
}

TEST_CASE("power density integrates to c y^delta") {
  KreinString s(kInf, DensitySpec::power(0.5, 2.0));
  CHECK(s.ac_mass(0.0, 4.0) == doctest::Approx(4.0));
  CHECK(s.ac_mass(1.0, 4.0) == doctest::Approx(2.0));
  CHECK(s.density(4.0) == doctest::Approx(2.0 * 0.5 / 2.0));
}

TEST_CASE("atoms count per endpoint convention") {
  KreinString s(kInf, DensitySpec::constant(1.0), 0.7, 0.0, {{1.0, 0.3}});
  CHECK(s.mass(0.0, 1.0, true, true) == doctest::Approx(2.0));
  CHECK(s.mass(0.0, 1.0, false, false) == doctest::Approx(1.0));
}

TEST_CASE("grid density matches closed form within interpolation error") {
  std::vector<double> y, v;
  for (int i = 0; i <= 200; ++i) {
    y.push_back(0.005 * i);
    v.push_back(1.0 + y.back());
  }
  KreinString s(1.0, DensitySpec::grid(y, v), 0.0, 0.0);
  CHECK(s.ac_mass(0.0, 1.0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(classify(s).variant == StringCase::CaseC);
}

TEST_CASE("grid with boundary singularity near critical exponent is indeterminate") {
  std::vector<double> y, v;
  for (int i = 0; i < 200; ++i) {
    y.push_back(0.005 * i);
    v.push_back(std::pow(1.0 - y.back(), -1.02));
  }
  KreinString s(1.0, DensitySpec::grid(y, v));
  CHECK_THROWS_AS(classify(s), Error);
}

TEST_CASE("invalid strings are rejected") {
  CHECK_THROWS_AS(KreinString(kInf, DensitySpec::constant(0.0)), Error);
  CHECK_THROWS_AS(KreinString(kInf, DensitySpec::power(-1.0)), Error);
  CHECK_THROWS_AS(KreinString(kInf, DensitySpec::boundary_power(1.5)), Error);
  CHECK_THROWS_AS(KreinString(1.0, DensitySpec::constant(1.0), 0.0, 0.0, {{1.5, 1.0}}), Error);
}

TEST_CASE("atomize lumps total mass and closes by case") {
  KreinString c(1.0, DensitySpec::constant(1.0), 0.2, 0.5);
  MeshSpec m;
  m.h = 0.01;
  const AtomicString a = atomize(c, m);
  CHECK(a.closure == Closure::Neumann);
  double total = 0.0;
  for (double w : a.masses) total += w;
  CHECK(total == doctest::Approx(1.7).epsilon(1e-12));

  KreinString b1(1.0, DensitySpec::boundary_power(1.5));
  m.eta = 1e-6;
  const AtomicString g = atomize(b1, m);
  CHECK(g.closure == Closure::Open);
  CHECK(g.dist.back() == doctest::Approx(1e-6).epsilon(1e-6));
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(g.nodes[j] > g.nodes[j - 1]);
}

TEST_CASE("two atoms in one cell raise MeshTooCoarse") {
  KreinString s(kInf, DensitySpec::constant(1.0), 0.0, 0.0, {{1.0, 1.0}, {1.001, 1.0}});
  MeshSpec m;
  m.h = 0.1;
  m.y_end = 3.0;
  CHECK_THROWS_AS(atomize(s, m), Error);
}
