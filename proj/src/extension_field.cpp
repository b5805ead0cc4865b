#include "xtend/extension_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "xtend/error.hpp"
#include "xtend/parallel.hpp"

namespace xtend {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "bad number '" + s + "' in y-grid spec");
  }
  if (used != s.size()) fail(ErrorKind::ParseError, "bad number '" + s + "' in y-grid spec");
  return v;
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Modes with coefficients below this fraction of the largest are skipped in
// derived checks; they cannot move a sup-norm by more than roundoff.
constexpr double kModeCutoff = 1e-14;

std::vector<std::size_t> significant_modes(const Eigen::VectorXd& c) {
  const double cmax = sup_norm(c);
  std::vector<std::size_t> out;
  for (int k = 0; k < c.size(); ++k)
    if (std::abs(c(k)) > kModeCutoff * cmax) out.push_back(static_cast<std::size_t>(k));
  return out;
}

double origin_exponent(const KreinString& s) {
  const DensitySpec& d = s.density_spec();
  return d.kind == DensityKind::Power ? d.exponent : 1.0;
}

}  // namespace

std::vector<double> parse_y_grid(const std::string& spec, const KreinString& s) {
  const auto parts = split(spec, ':');
  if (parts.empty() || (parts[0] != "lin" && parts[0] != "geo"))
    fail(ErrorKind::ParseError, "y-grid spec must start with lin: or geo:");
  const bool geo = parts[0] == "geo";
  if (parts.size() != (geo ? 5u : 4u)) fail(ErrorKind::ParseError, "y-grid spec has the wrong number of fields");
  const double a = to_number(parts[1]);
  const bool to_end = parts[2] == "y1";
  if (to_end && !s.finite()) fail(ErrorKind::InvalidArgument, "y-grid upper bound 'y1' needs a finite string");
  const double b = to_end ? s.y1() : to_number(parts[2]);
  const double nd = to_number(parts[3]);
  const double p = geo ? to_number(parts[4]) : 1.0;
  if (!(a >= 0.0) || !(b > a) || !(nd >= 1.0) || nd != std::floor(nd) || !(p > 0.0))
    fail(ErrorKind::InvalidArgument, "y-grid needs 0 <= a < b, integer n >= 1 and p > 0");
  const int n = static_cast<int>(nd);
  const bool two_sided = geo && s.finite() && b == s.y1();
  std::vector<double> y;
  for (int j = 0; j <= n; ++j) {
    const double t = static_cast<double>(j) / n;
    double g = t;
    if (geo) {
      const double tp = std::pow(t, p);
      g = two_sided ? tp / (tp + std::pow(1.0 - t, p)) : tp;
    }
    const double v = a + (b - a) * g;
    if (v < s.R()) y.push_back(v);
  }
  return y;
}

ExtensionSolution extend(std::shared_ptr<const BernsteinFn> psi, std::shared_ptr<const DiscreteGenerator> L,
                         const Eigen::VectorXd& f, std::vector<double> y_grid) {
  if (!f.allFinite()) fail(ErrorKind::InvalidArgument, "f must be finite");
  if (f.size() != L->size()) fail(ErrorKind::InvalidArgument, "f does not match the operator grid");
  const KreinString& s = psi->string();
  std::sort(y_grid.begin(), y_grid.end());
  if (y_grid.empty()) y_grid.push_back(0.0);
  if (y_grid.front() < 0.0 || y_grid.back() >= s.R()) fail(ErrorKind::InvalidArgument, "y-grid must lie in [0, R)");

  ExtensionSolution sol;
  sol.psi_ = psi;
  sol.L_ = L;
  sol.class_ = classify(s);
  sol.y_ = std::move(y_grid);
  sol.f_ = f;
  sol.c_ = L->coefficients(f);
  const int n = L->size();
  sol.profiles_.resize(static_cast<std::size_t>(n));
  const double y_needed = sol.y_.back();
  parallel_for(static_cast<std::size_t>(n),
               [&](std::size_t k) { sol.profiles_[k] = psi->profile(L->lambdas()(static_cast<int>(k)), y_needed); });

  Eigen::MatrixXd Phi(n, static_cast<int>(sol.y_.size()));
  for (int k = 0; k < n; ++k)
    for (std::size_t j = 0; j < sol.y_.size(); ++j)
      Phi(k, static_cast<int>(j)) = sol.profiles_[static_cast<std::size_t>(k)]->phi(sol.y_[j]);
  sol.u_ = L->modes() * sol.c_.asDiagonal() * Phi;
  return sol;
}

namespace {

double mode_phi(const ExtensionSolution& sol, std::size_t k, double y) {
  const ModeProfile& p = sol.profile(k);
  if (y <= p.y_end() || y == 0.0) return p.phi(y);
  return sol.psi().profile(p.lambda(), y)->phi(y);
}

double mode_dphi(const ExtensionSolution& sol, std::size_t k, double y) {
  const ModeProfile& p = sol.profile(k);
  if (y < p.y_end()) return p.dphi_right(y);
  return sol.psi().profile(p.lambda(), y * 1.01)->dphi_right(y);
}

double mode_integral(const ExtensionSolution& sol, std::size_t k, double a, double b, bool cl, bool cr) {
  const ModeProfile& p = sol.profile(k);
  if (b <= p.y_end()) return p.integral(a, b, cl, cr);
  return sol.psi().profile(p.lambda(), b)->integral(a, b, cl, cr);
}

Eigen::VectorXd synthesize_modes(const ExtensionSolution& sol, const std::function<double(std::size_t)>& g) {
  Eigen::VectorXd c = sol.coefficients();
  for (int k = 0; k < c.size(); ++k) c(k) *= c(k) == 0.0 ? 0.0 : g(static_cast<std::size_t>(k));
  return sol.generator().synthesize(c);
}

}  // namespace

Eigen::VectorXd ExtensionSolution::at(double y) const {
  if (y < 0.0 || y >= string().R()) fail(ErrorKind::InvalidArgument, "height outside [0, R)");
  return synthesize_modes(*this, [&](std::size_t k) { return mode_phi(*this, k, y); });
}

Eigen::VectorXd ExtensionSolution::dy_right(double y) const {
  if (y < 0.0 || y >= string().R()) fail(ErrorKind::InvalidArgument, "height outside [0, R)");
  if (y == 0.0) return neumann();
  return synthesize_modes(*this, [&](std::size_t k) { return mode_dphi(*this, k, y); });
}

Eigen::VectorXd ExtensionSolution::neumann() const {
  return synthesize_modes(*this, [&](std::size_t k) { return profiles_[k]->dphi_zero(); });
}

Eigen::VectorXd ExtensionSolution::sticky_term() const {
  const double m0 = string().m0();
  return synthesize_modes(*this, [&](std::size_t k) { return -m0 * L_->lambdas()(static_cast<int>(k)); });
}

Eigen::VectorXd dirichlet_to_neumann(const ExtensionSolution& sol) { return sol.neumann() + sol.sticky_term(); }

double FiniteDifferenceCheck::min_order() const {
  if (observed_orders.empty()) return 0.0;
  return *std::min_element(observed_orders.begin(), observed_orders.end());
}

namespace {

// phi(lambda, .) at h0 / 2^i, i = 0..3, by forward recursion on [0, h0] with
// the solver's psi: fN - psi fD has no cancellation on so short a window.
std::array<double, 4> local_phi(const KreinString& s, double lambda, double psi, double h0, int log2_cells) {
  const std::size_t N = std::size_t{1} << log2_cells;
  const double hm = h0 / static_cast<double>(N);
  AtomicString a;
  a.nodes.resize(N + 1);
  a.dist.assign(N + 1, kInf);
  a.gaps.assign(N, hm);
  a.masses.resize(N + 1);
  for (std::size_t j = 0; j <= N; ++j) a.nodes[j] = static_cast<double>(j) * hm;
  a.masses[0] = s.m0() + s.ac_mass(0.0, 0.5 * hm);
  for (std::size_t j = 1; j <= N; ++j) a.masses[j] = s.ac_mass(a.nodes[j] - 0.5 * hm, a.nodes[j] + 0.5 * hm);
  const FundamentalPair fp = solve_pair(a, lambda, h0);
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const std::size_t j = N >> i;
    out[static_cast<std::size_t>(i)] = std::ldexp(fp.fN[j] - psi * fp.fD[j], fp.scale_exp[j]);
  }
  return out;
}

}  // namespace

FiniteDifferenceCheck dton_finite_difference_check(const ExtensionSolution& sol, double h0) {
  const KreinString& s = sol.string();
  const auto modes = significant_modes(sol.coefficients());
  if (h0 <= 0.0) {
    double scale = 1.0;
    for (std::size_t k : modes) scale = std::max(scale, sol.profile(k).psi());
    h0 = 0.05 / scale;
  }
  h0 = std::min(h0, 0.1 * std::min(s.R(), s.y1()));
  if (!s.atoms().empty()) h0 = std::min(h0, 0.5 * s.atoms().front().y);

  FiniteDifferenceCheck out;
  out.leading_exponent = origin_exponent(s);
  const Eigen::VectorXd target = sol.neumann();
  const Eigen::VectorXd& c = sol.coefficients();
  const double factor = 1.0 / (std::exp2(scheme_order(s)) - 1.0);

  std::vector<std::array<double, 4>> phis(modes.size());
  parallel_for(modes.size(), [&](std::size_t m) {
    const ModeProfile& p = sol.profile(modes[m]);
    const auto coarse = local_phi(s, p.lambda(), p.psi(), h0, 13);
    const auto fine = local_phi(s, p.lambda(), p.psi(), h0, 14);
    for (std::size_t i = 0; i < 4; ++i) phis[m][i] = fine[i] + (fine[i] - coarse[i]) * factor;
  });

  std::vector<Eigen::VectorXd> D;
  for (int i = 0; i < 4; ++i) {
    const double h = std::ldexp(h0, -i);
    out.steps.push_back(h);
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(c.size());
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const auto k = static_cast<int>(modes[m]);
      coeff(k) = c(k) * (phis[m][static_cast<std::size_t>(i)] - 1.0) / h;
    }
    D.push_back(sol.generator().synthesize(coeff));
    out.raw_errors.push_back(sup_norm(D.back() - target));
  }
  const double r = std::exp2(out.leading_exponent);
  for (int i = 0; i + 1 < 4; ++i) {
    const Eigen::VectorXd E = (r * D[static_cast<std::size_t>(i + 1)] - D[static_cast<std::size_t>(i)]) / (r - 1.0);
    out.extrapolant_errors.push_back(sup_norm(E - target));
  }
  for (std::size_t i = 0; i + 1 < out.extrapolant_errors.size(); ++i) {
    out.observed_orders.push_back(std::log2(out.extrapolant_errors[i] / out.extrapolant_errors[i + 1]));
  }
  return out;
}

double Bump::value(double y) const {
  const double t = (y - center) / radius;
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

double Bump::second_derivative(double y) const {
  const double t = (y - center) / radius;
  if (std::abs(t) >= 1.0) return 0.0;
  const double s = 1.0 - t * t;
  const double g = std::exp(1.0 - 1.0 / s);
  const double s2 = s * s;
  return g * (4.0 * t * t / (s2 * s2) - 2.0 / s2 - 8.0 * t * t / (s2 * s)) / (radius * radius);
}

std::vector<Bump> bump_family(const KreinString& s) {
  const double top = std::min({s.R(), s.y1(), 2.0});
  const double c = 0.5 * top;
  return {Bump{c, 0.4 * top}, Bump{c, 0.2 * top}, Bump{0.3 * top, 0.1 * top}};
}

ModalField modal_field(const ExtensionSolution& sol) {
  ModalField m;
  m.L = std::shared_ptr<const DiscreteGenerator>(std::shared_ptr<const DiscreteGenerator>{}, &sol.generator());
  m.coeffs = sol.coefficients();
  m.phi = [&sol](std::size_t k, double y) { return mode_phi(sol, k, y); };
  return m;
}

double weak_residual(const KreinString& s, const ModalField& u, const Bump& g, double h) {
  if (!(g.radius > 0.0) || !(h > 0.0)) fail(ErrorKind::InvalidArgument, "bump radius and mesh must be positive");
  if (!(g.lo() > 0.0) || !(g.hi() < std::min(s.R(), s.y1())))
    fail(ErrorKind::SupportViolation, "test function support must lie inside (0, y1)");
  std::vector<PointMass> inside;
  for (const auto& a : s.atoms())
    if (a.y > g.lo() && a.y < g.hi()) inside.push_back(a);

  // Cells of width <= h, split at atoms so phi' kinks fall on cell edges; Gauss-Legendre inside each cell.
  static constexpr std::array<double, 8> gx{0.0950125098376375, 0.2816035507792589, 0.4580167776572274,
                                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                            0.9445750230732326, 0.9894009349916499};
  static constexpr std::array<double, 8> gw{0.1894506104550686, 0.1826034150449236, 0.1691565193950026,
                                            0.1495959888165768, 0.1246289712555340, 0.0951585116824926,
                                            0.0622535239386477, 0.0271524594117540};
  std::vector<double> breaks{g.lo()};
  for (const auto& a : inside) breaks.push_back(a.y);
  breaks.push_back(g.hi());
  std::vector<double> ys, wt;
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double len = breaks[b + 1] - breaks[b];
    const int cells = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
    const double hc = len / cells;
    for (int c = 0; c < cells; ++c) {
      const double mid = breaks[b] + (c + 0.5) * hc;
      for (std::size_t q = 0; q < gx.size(); ++q)
        for (double sgn : {-1.0, 1.0}) {
          ys.push_back(mid + sgn * 0.5 * hc * gx[q]);
          wt.push_back(0.5 * hc * gw[q]);
        }
    }
  }
  const auto modes = significant_modes(u.coeffs);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(u.coeffs.size());
  parallel_for(modes.size(), [&](std::size_t m) {
    const std::size_t k = modes[m];
    const double lambda = u.L->lambdas()(static_cast<int>(k));
    double i_mass = 0.0, i_curv = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double p = u.phi(k, ys[i]);
      i_mass += wt[i] * p * g.value(ys[i]) * s.density(ys[i]);
      i_curv += wt[i] * p * g.second_derivative(ys[i]);
    }
    for (const auto& a : inside) i_mass += a.w * u.phi(k, a.y) * g.value(a.y);
    r(static_cast<int>(k)) = u.coeffs(static_cast<int>(k)) * (-lambda * i_mass + i_curv);
  });
  return sup_norm(u.L->synthesize(r));
}

double weak_residual(const ExtensionSolution& sol, const Bump& g, double h) {
  return weak_residual(sol.string(), modal_field(sol), g, h);
}

double forward_derivative_jump_check(const ExtensionSolution& sol, double y_lo, double y_hi) {
  const KreinString& s = sol.string();
  if (!(0.0 < y_lo && y_lo < y_hi && y_hi < std::min(s.R(), s.y1())))
    fail(ErrorKind::InvalidArgument, "need 0 < y_lo < y_hi < y1");
  const Eigen::VectorXd d = synthesize_modes(sol, [&](std::size_t k) {
    const double lambda = sol.generator().lambdas()(static_cast<int>(k));
    return mode_dphi(sol, k, y_hi) - mode_dphi(sol, k, y_lo) - lambda * mode_integral(sol, k, y_lo, y_hi, false, true);
  });
  return sup_norm(d);
}

BoundaryReport boundary_behavior_check(const ExtensionSolution& sol, double tol) {
  const KreinString& s = sol.string();
  BoundaryReport rep;
  rep.variant = sol.string_class().variant;
  switch (rep.variant) {
    case StringCase::CaseA:
      rep.condition = "no y1 condition applies";
      return rep;
    case StringCase::CaseB1:
    case StringCase::CaseB2: {
      rep.applicable = true;
      rep.condition = rep.variant == StringCase::CaseB1 ? "u(., y1-) = 0" : "sup_x |u(x, y1 - h)| -> 0";
      Eigen::VectorXd last;
      for (double d : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double dist = d * s.y1();
        last = sol.at(s.y1() - dist);
        rep.distances.push_back(dist);
        rep.sup_values.push_back(sup_norm(last));
      }
      for (std::size_t i = 1; i < rep.sup_values.size(); ++i)
        if (rep.sup_values[i] > rep.sup_values[i - 1] * (1.0 + 1e-12)) rep.decreasing = false;
      const int n = static_cast<int>(last.size());
      const bool torus = sol.generator().op().domain == Domain::Torus;
      for (int i = 0; i + 1 < n + (torus ? 1 : 0); ++i)
        rep.oscillation = std::max(rep.oscillation, std::abs(last((i + 1) % n) - last(i)));
      rep.pass = rep.decreasing && rep.sup_values.back() < rep.sup_values.front();
      return rep;
    }
    case StringCase::CaseC: {
      rep.applicable = true;
      rep.condition = "d-u(., y1-) = m1 L u(., y1)";
      const double y1 = s.y1();
      const Eigen::VectorXd r = synthesize_modes(sol, [&](std::size_t k) {
        const ModeProfile& p = sol.profile(k);
        const double lambda = p.lambda();
        const double left = -p.psi() + lambda * mode_integral(sol, k, 0.0, y1, true, false);
        return left + lambda * s.m1() * mode_phi(sol, k, y1);
      });
      rep.residual = sup_norm(r);
      rep.pass = rep.residual <= tol * std::max(1.0, sup_norm(sol.f()));
      return rep;
    }
  }
  return rep;
}

HarmonicMeasure::HarmonicMeasure(const BernsteinFn& psi, double y, double box, int log2_points) {
  const KreinString& s = psi.string();
  if (!(y > 0.0) || !(y < std::min(s.R(), s.y1()))) fail(ErrorKind::InvalidArgument, "harmonic measure needs 0 < y < y1");
  if (log2_points < 4 || log2_points > 24 || !(box > 0.0)) fail(ErrorKind::InvalidArgument, "bad box parameters");
  const std::size_t N = std::size_t{1} << log2_points;
  dx_ = box / static_cast<double>(N);
  const double xi_max = std::numbers::pi / dx_;
  const PhiTable table(psi, y, 1.01 * xi_max * xi_max);

  std::vector<std::complex<double>> spec(N), out(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double kk = k <= N / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(N);
    const double xi = 2.0 * std::numbers::pi * kk / box;
    spec[k] = table(xi * xi);
  }
  Eigen::FFT<double> fft;
  fft.inv(out, spec);
  x_.resize(N);
  density_.resize(N);
  cdf_.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const std::size_t src = (j + N / 2) % N;
    const double idx = src < N / 2 ? static_cast<double>(src) : static_cast<double>(src) - static_cast<double>(N);
    x_[j] = idx * dx_;
    density_[j] = out[src].real() / dx_;
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    acc += density_[j] * dx_;
    cdf_[j] = acc;
  }
  mass_ = table(0.0);
}

double HarmonicMeasure::density(double x) const {
  const double t = (x - x_.front()) / dx_;
  if (t < 0.0 || t > static_cast<double>(x_.size() - 1)) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(t), x_.size() - 2);
  const double u = t - static_cast<double>(i);
  return density_[i] * (1.0 - u) + density_[i + 1] * u;
}

double HarmonicMeasure::cdf(double x) const {
  // cdf_[j] is the mass up to x_j + dx / 2.
  const double t = (x - x_.front() - 0.5 * dx_) / dx_;
  if (t < 0.0) return std::max(0.0, cdf_.front() * (1.0 + t));
  if (t >= static_cast<double>(x_.size() - 1)) return mass_;
  const auto i = static_cast<std::size_t>(t);
  const double u = t - static_cast<double>(i);
  return cdf_[i] * (1.0 - u) + cdf_[i + 1] * u;
}

std::vector<double> harmonic_measure_density(const BernsteinFn& psi, double y, const std::vector<double>& x_grid) {
  const HarmonicMeasure hm(psi, y);
  std::vector<double> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) out.push_back(hm.density(x));
  return out;
}

}  // namespace xtend
