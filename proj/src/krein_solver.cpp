#include "xtend/krein_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "xtend/error.hpp"
#include "xtend/parallel.hpp"

namespace xtend {

namespace {

constexpr int kRescaleExp = 600;
const double kRescaleAt = std::ldexp(1.0, kRescaleExp);

double psi_zero(const KreinString& s) {
  const double r = s.R();
  return r < kInf ? 1.0 / r : 0.0;
}

// Length scale on which lambda * m([0, y]) * y reaches one (absolutely
// continuous part only; atoms are handled exactly by the recursion).
double length_scale(const KreinString& s, double lambda) {
  auto g = [&](double y) { return lambda * s.ac_mass(0.0, y) * y; };
  double hi_cap = s.finite() ? s.y1() : 1e15;
  if (s.finite() && g(hi_cap) < 1.0) return hi_cap;
  double lo = 1e-15, hi = hi_cap;
  if (g(lo) >= 1.0) return lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (g(mid) < 1.0) lo = mid; else hi = mid;
    if (hi / lo < 1.0 + 1e-6) break;
  }
  return std::sqrt(lo * hi);
}

double min_atom_gap(const KreinString& s) {
  double gap = kInf;
  double prev = 0.0;
  for (const auto& a : s.atoms()) {
    gap = std::min(gap, a.y - prev);
    prev = a.y;
  }
  if (!s.atoms().empty() && s.finite()) gap = std::min(gap, s.y1() - prev);
  return gap;
}

struct LevelOutcome {
  double lo = 0.0;
  double hi = 0.0;
  double y_used = 0.0;
  std::size_t nodes = 0;
  double y_end = 0.0;
  double eta = 0.0;
  bool have_profile = false;
  ModeProfile::Level profile;
};

ModeProfile::Level backward_profile(const AtomicString& a, std::size_t stop, double lambda, Closure closure,
                                    const KreinString& s) {
  const std::size_t S = stop;
  std::vector<double> g(S + 1), slope(S + 1, 0.0);
  std::vector<int> eg(S + 1, 0), es(S + 1, 0);
  double gcur, scur;
  int e = 0;
  if (closure == Closure::Neumann) {
    gcur = 1.0;
    scur = -lambda * a.masses[S] * gcur;
  } else {
    gcur = 0.0;
    scur = -1.0;
  }
  g[S] = gcur;
  eg[S] = 0;
  slope[S] = 0.0;
  for (std::size_t jj = S; jj-- > 0;) {
    // slope on (z_jj, z_jj+1) is scur
    slope[jj] = scur;
    es[jj] = e;
    gcur = gcur - a.gaps[jj] * scur;
    g[jj] = gcur;
    eg[jj] = e;
    scur = scur - lambda * a.masses[jj] * gcur;  // slope on (z_jj-1, z_jj); at jj = 0 this is p(0-)
    if (std::max(std::abs(gcur), std::abs(scur)) > kRescaleAt) {
      gcur = std::ldexp(gcur, -kRescaleExp);
      scur = std::ldexp(scur, -kRescaleExp);
      e += kRescaleExp;
    }
  }
  const double g0 = g[0];
  const int e0 = eg[0];
  ModeProfile::Level lvl;
  lvl.closure = closure == Closure::Neumann ? Closure::Neumann : Closure::Dirichlet;
  lvl.z.assign(a.nodes.begin(), a.nodes.begin() + static_cast<std::ptrdiff_t>(S + 1));
  lvl.dist.assign(a.dist.begin(), a.dist.begin() + static_cast<std::ptrdiff_t>(S + 1));
  lvl.phi.resize(S + 1);
  lvl.slope.resize(S + 1);
  for (std::size_t j = 0; j <= S; ++j) {
    lvl.phi[j] = std::ldexp(g[j] / g0, eg[j] - e0);
    lvl.slope[j] = j < S ? std::ldexp(slope[j] / g0, es[j] - e0) : 0.0;
  }
  lvl.phi[0] = 1.0;
  // scur holds p(0-) scaled by 2^e.
  lvl.psi_atomic = -std::ldexp(scur / g0, e - e0);
  lvl.atom.assign(S + 1, 0.0);
  lvl.atom[0] = s.m0();
  for (const auto& atom : s.atoms()) {
    const auto it = std::lower_bound(lvl.z.begin(), lvl.z.end(), atom.y);
    if (it != lvl.z.end() && *it == atom.y) lvl.atom[static_cast<std::size_t>(it - lvl.z.begin())] += atom.w;
  }
  if (closure == Closure::Neumann) lvl.atom[S] += s.m1();
  return lvl;
}

LevelOutcome run_level(const KreinString& s, double lambda, double h, double tol_rel, double y_end_guess,
                       double eta_guess, double y_needed, bool want_profile, std::size_t max_nodes) {
  MeshSpec mesh;
  mesh.h = h;
  mesh.y_end = s.finite() ? kInf : std::max(y_end_guess, 1.05 * y_needed + 2.0 * h);
  mesh.eta = eta_guess;
  for (int attempt = 0; attempt < 80; ++attempt) {
    if (!s.finite() && mesh.y_end / h > static_cast<double>(max_nodes) * 4.0)
      fail(ErrorKind::BracketStalled, "truncation point exceeds the node budget before the bracket closed");
    const AtomicString a = atomize(s, mesh);
    const std::size_t N = a.size() - 1;
    double fN = 1.0, fD = 0.0;
    double pN = lambda * a.masses[0], pD = 1.0;
    int e = 0;
    LevelOutcome out;
    bool stopped = false;
    std::size_t stop = N;
    for (std::size_t j = 1; j <= N; ++j) {
      fN += a.gaps[j - 1] * pN;
      fD += a.gaps[j - 1] * pD;
      const bool is_last = j == N;
      if (is_last && a.closure == Closure::Dirichlet) {
        out.lo = out.hi = fN / fD;
        stopped = true;
        stop = j;
        break;
      }
      pN += lambda * a.masses[j] * fN;
      pD += lambda * a.masses[j] * fD;
      if (is_last && a.closure == Closure::Neumann) {
        out.lo = out.hi = pN / pD;
        stopped = true;
        stop = j;
        break;
      }
      const double hi = fN / fD;
      const double lo = pN / pD;
      const double mid = 0.5 * (hi + lo);
      if (a.nodes[j] >= y_needed && hi - lo <= tol_rel * std::abs(mid)) {
        out.lo = lo;
        out.hi = hi;
        stopped = true;
        stop = j;
        break;
      }
      if (std::max({std::abs(fN), std::abs(fD), std::abs(pN), std::abs(pD)}) > kRescaleAt) {
        fN = std::ldexp(fN, -kRescaleExp);
        fD = std::ldexp(fD, -kRescaleExp);
        pN = std::ldexp(pN, -kRescaleExp);
        pD = std::ldexp(pD, -kRescaleExp);
        e += kRescaleExp;
      }
    }
    if (stopped) {
      out.y_used = a.nodes[stop];
      out.nodes = stop + 1;
      out.y_end = mesh.y_end;
      out.eta = a.eta;
      if (want_profile) {
        out.profile = backward_profile(a, stop, lambda, a.closure == Closure::Neumann ? Closure::Neumann : Closure::Dirichlet, s);
        out.have_profile = true;
      }
      return out;
    }
    if (!s.finite()) {
      mesh.y_end *= 2.0;
    } else {
      const double eta = a.eta > 0 ? a.eta : 1e-8 * s.y1();
      if (eta < 1e-280 * s.y1()) break;
      mesh.eta = eta * 1e-4;
    }
  }
  std::ostringstream msg;
  msg << "bracket did not close for lambda=" << lambda << " at spacing " << h;
  fail(ErrorKind::BracketStalled, msg.str());
}

struct SolveResult {
  PsiValue value;
  std::vector<ModeProfile::Level> levels;
  double richardson = 0.0;
};


ModeProfile::Level linear_profile(const KreinString& s, double psi0, double y_needed) {
  ModeProfile::Level lvl;
  double y_end;
  if (s.R() < kInf) {
    y_end = s.R();
    lvl.closure = Closure::Dirichlet;
  } else if (s.finite()) {
    y_end = s.y1();
    lvl.closure = Closure::Neumann;
  } else {
    y_end = std::max(1.0, y_needed);
    lvl.closure = Closure::Neumann;
  }
  lvl.z = {0.0, y_end};
  lvl.dist = {s.finite() ? s.y1() : kInf, s.finite() ? s.y1() - y_end : kInf};
  lvl.phi = {1.0, 1.0 - psi0 * y_end};
  lvl.slope = {-psi0, 0.0};
  lvl.atom = {s.m0(), 0.0};
  if (lvl.closure == Closure::Neumann && s.finite()) lvl.atom[1] = s.m1();
  lvl.psi_atomic = psi0;
  return lvl;
}

SolveResult solve_levels(const KreinString& s, double lambda, const PsiOptions& opts, double y_needed,
                         bool want_profile) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorKind::InvalidArgument, "lambda must be finite and >= 0");
  SolveResult res;
  if (lambda == 0.0) {
    const double p0 = psi_zero(s);
    res.value.value = res.value.lo = res.value.hi = p0;
    res.value.y_max_used = s.R();
    res.value.levels = 0;
    if (want_profile) res.levels.push_back(linear_profile(s, p0, y_needed));
    return res;
  }
  const double ell = length_scale(s, lambda);
  double h0 = opts.theta * ell;
  if (s.finite()) h0 = std::min(h0, s.y1() / 16.0);
  h0 = std::min(h0, min_atom_gap(s) / 3.0);
  // Resolve y_needed only down to h0/64: below that the profile is linear to O((h/ell)^2).
  if (y_needed > 0.0) h0 = std::min(h0, std::max(y_needed / 4.0, h0 / 64.0));
  const double tol_b = 0.05 * opts.tol;

  double y_end = s.finite() ? kInf : opts.y_end_factor * ell;
  double eta = 0.0;
  std::vector<double> psis;
  std::vector<double> extrapolated;
  std::vector<LevelOutcome> outcomes;
  double value = 0.0, err = kInf;
  bool extrapolate = false;
  const double p_star = scheme_order(s);
  const double factor = 1.0 / (std::exp2(p_star) - 1.0);
  for (int k = 0; k < opts.max_levels; ++k) {
    const double h = std::ldexp(h0, -k);
    double est_nodes = s.finite() ? s.y1() / h : std::max(y_end, y_needed) / h;
    if (s.finite() && s.R() == s.y1() && !s.infinite_beyond()) est_nodes *= 2.0 + std::log(1e8);
    if (k >= 2 && est_nodes > static_cast<double>(opts.max_nodes)) break;
    LevelOutcome out = run_level(s, lambda, h, tol_b, y_end, eta, y_needed, want_profile, opts.max_nodes);
    if (!s.finite()) y_end = std::max(out.y_used * 1.1, y_end);
    eta = out.eta;
    const double v = 0.5 * (out.lo + out.hi);
    psis.push_back(v);
    outcomes.push_back(std::move(out));
    if (outcomes.size() > 2) outcomes.erase(outcomes.begin());
    const std::size_t n = psis.size();
    value = v;
    extrapolate = false;
    if (n >= 2) {
      const double e1 = psis[n - 1] - psis[n - 2];
      err = std::abs(e1);
      if (std::abs(e1) <= 0.01 * opts.tol * std::abs(v)) {
        extrapolate = true;
        value = v + e1 * factor;
        err = std::abs(e1);
        break;
      }
      if (n >= 3) {
        const double e0 = psis[n - 2] - psis[n - 3];
        const double order = std::log2(std::abs(e0 / e1));
        if (std::abs(order - p_star) < 0.4 && e0 * e1 > 0) {
          extrapolate = true;
          value = v + e1 * factor;
          extrapolated.push_back(value);
          err = extrapolated.size() >= 2 ? std::abs(extrapolated.back() - extrapolated[extrapolated.size() - 2])
                                         : std::abs(e1) * factor;
        } else {
          extrapolated.clear();
          err = order > 0.5 && std::isfinite(order) ? std::abs(e1) / (std::exp2(order) - 1.0) : std::abs(e1);
        }
        if (err <= opts.tol * std::abs(value)) break;
      }
    }
  }
  const LevelOutcome& fine = outcomes.back();
  res.value.value = value;
  res.value.lo = fine.lo;
  res.value.hi = fine.hi;
  res.value.y_max_used = fine.y_used;
  res.value.mesh_error = err;
  res.value.levels = static_cast<int>(psis.size());
  res.value.nodes = fine.nodes;
  res.richardson = extrapolate ? factor : 0.0;
  if (want_profile) {
    for (auto& o : outcomes) res.levels.push_back(std::move(o.profile));
  }
  return res;
}

std::size_t cell_index(const std::vector<double>& z, double y) {
  const auto it = std::upper_bound(z.begin(), z.end(), y);
  if (it == z.begin()) return 0;
  return static_cast<std::size_t>(it - z.begin()) - 1;
}

double level_phi(const ModeProfile::Level& l, double y) {
  if (y <= 0.0) return 1.0;
  if (y >= l.z.back()) return l.closure == Closure::Neumann ? l.phi.back() : 0.0;
  const std::size_t j = cell_index(l.z, y);
  return l.phi[j] + l.slope[j] * (y - l.z[j]);
}

double level_slope(const KreinString& s, double lambda, const ModeProfile::Level& l, double y) {
  if (y >= l.z.back()) return 0.0;
  y = std::max(y, 0.0);
  const std::size_t j = cell_index(l.z, y);
  const double mid = 0.5 * (l.z[j] + l.z[j + 1]);
  const double p = level_phi(l, y);
  if (y >= mid) return l.slope[j] + lambda * s.ac_mass(mid, y) * p;
  return l.slope[j] - lambda * s.ac_mass(y, mid) * p;
}

// Integral of phi against the density over [a, b] within cell j.
double cell_integral(const KreinString& s, const ModeProfile::Level& l, std::size_t j, double a, double b) {
  if (b <= a) return 0.0;
  Cell c;
  c.a = a;
  c.len = b - a;
  c.dist = l.dist[j] - (a - l.z[j]);
  const double m = s.ac_mass(c);
  if (m == 0.0) return 0.0;
  const double phij = l.phi[j], sl = l.slope[j];
  if (sl == 0.0) return phij * m;
  double centred;
  if (s.finite() && l.dist[j] < l.z[j]) {
    centred = l.dist[j] * m - s.ac_end_moment(c);
  } else {
    centred = s.ac_moment(c) - l.z[j] * m;
  }
  return phij * m + sl * centred;
}

double level_integral(const KreinString& s, const ModeProfile::Level& l, double a, double b, bool closed_left,
                      bool closed_right) {
  double total = 0.0;
  const double zend = l.z.back();
  const double hi = std::min(b, zend);
  if (hi > a) {
    std::size_t j = cell_index(l.z, a);
    for (; j + 1 < l.z.size() && l.z[j] < hi; ++j) {
      total += cell_integral(s, l, j, std::max(a, l.z[j]), std::min(hi, l.z[j + 1]));
    }
  }
  if (a == 0.0 && closed_left) total += s.m0();
  for (const auto& atom : s.atoms()) {
    const bool after_left = atom.y > a || (atom.y == a && closed_left);
    const bool before_right = atom.y < b || (atom.y == b && closed_right);
    if (after_left && before_right) total += atom.w * level_phi(l, atom.y);
  }
  if (s.finite() && b >= s.y1() && closed_right && l.closure == Closure::Neumann) total += s.m1() * l.phi.back();
  return total;
}

}  // namespace

double scheme_order(const KreinString& s) {
  const DensitySpec& d = s.density_spec();
  if (d.kind == DensityKind::Power && d.exponent < 1.0) return 1.0 + d.exponent;
  return 2.0;
}

double FundamentalPair::wronskian_defect(std::size_t j) const {
  const double a = fN[j] * pD[j];
  const double b = fD[j] * pN[j];
  const double one = std::ldexp(1.0, -2 * scale_exp[j]);
  const double scale = std::max(one, std::abs(a) + std::abs(b));
  return std::abs((a - b) - one) / scale;
}

FundamentalPair solve_pair(const AtomicString& a, double lambda, double y_max) {
  if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  if (y_max > a.nodes.back() * (1.0 + 1e-12)) fail(ErrorKind::InvalidArgument, "y_max beyond the last node");
  FundamentalPair out;
  out.lambda = lambda;
  double fN = 1.0, fD = 0.0, pN = lambda * a.masses[0], pD = 1.0;
  int e = 0;
  auto push = [&](std::size_t j) {
    out.nodes.push_back(a.nodes[j]);
    out.fN.push_back(fN);
    out.fD.push_back(fD);
    out.pN.push_back(pN);
    out.pD.push_back(pD);
    out.scale_exp.push_back(e);
  };
  push(0);
  for (std::size_t j = 1; j < a.size() && a.nodes[j] <= y_max * (1.0 + 1e-12); ++j) {
    fN += a.gaps[j - 1] * pN;
    fD += a.gaps[j - 1] * pD;
    pN += lambda * a.masses[j] * fN;
    pD += lambda * a.masses[j] * fD;
    if (std::max({std::abs(fN), std::abs(fD), std::abs(pN), std::abs(pD)}) > kRescaleAt) {
      fN = std::ldexp(fN, -kRescaleExp);
      fD = std::ldexp(fD, -kRescaleExp);
      pN = std::ldexp(pN, -kRescaleExp);
      pD = std::ldexp(pD, -kRescaleExp);
      e += kRescaleExp;
    }
    push(j);
  }
  return out;
}

PsiValue psi(const KreinString& s, double lambda, const PsiOptions& opts) {
  return solve_levels(s, lambda, opts, 0.0, false).value;
}

ModeProfile::ModeProfile(std::shared_ptr<const KreinString> s, double lambda, double psi,
                         std::vector<Level> levels, double richardson)
    : s_(std::move(s)), lambda_(lambda), psi_(psi), levels_(std::move(levels)), richardson_(richardson) {
  if (levels_.empty()) fail(ErrorKind::InvalidArgument, "profile needs at least one level");
  if (levels_.size() < 2) richardson_ = 0.0;
}

template <typename F>
double ModeProfile::combine(F&& per_level) const {
  const double fine = per_level(levels_.back());
  if (richardson_ == 0.0) return fine;
  const double coarse = per_level(levels_[levels_.size() - 2]);
  return fine + (fine - coarse) * richardson_;
}

double ModeProfile::phi(double y) const {
  if (y <= 0.0) return 1.0;
  return combine([&](const Level& l) { return level_phi(l, y); });
}

double ModeProfile::dphi_right(double y) const {
  return combine([&](const Level& l) { return level_slope(*s_, lambda_, l, y); });
}

double ModeProfile::dphi_zero() const {
  const double m0 = s_->m0();
  return combine([&](const Level& l) { return -l.psi_atomic + lambda_ * m0; });
}

double ModeProfile::integral(double a, double b, bool closed_left, bool closed_right) const {
  return combine([&](const Level& l) { return level_integral(*s_, l, a, b, closed_left, closed_right); });
}

ModeProfile mode_profile(std::shared_ptr<const KreinString> s, double lambda, double y_needed,
                         const PsiOptions& opts) {
  SolveResult r = solve_levels(*s, lambda, opts, y_needed, true);
  return ModeProfile(std::move(s), lambda, r.value.value, std::move(r.levels), r.richardson);
}

double phi(const KreinString& s, double lambda, double y, const PsiOptions& opts) {
  if (y < 0.0) fail(ErrorKind::InvalidArgument, "phi needs y >= 0");
  if (y >= s.R()) fail(ErrorKind::InvalidArgument, "phi needs y < R");
  if (y == 0.0) return 1.0;
  if (lambda == 0.0) return 1.0 - psi_zero(s) * y;
  auto sp = std::make_shared<const KreinString>(s);
  return mode_profile(sp, lambda, y, opts).phi(y);
}

double dphi_forward(const KreinString& s, double lambda, double y, const PsiOptions& opts) {
  if (y < 0.0 || y >= s.R()) fail(ErrorKind::InvalidArgument, "dphi_forward needs 0 <= y < R");
  if (lambda == 0.0) return -psi_zero(s);
  auto sp = std::make_shared<const KreinString>(s);
  const ModeProfile prof = mode_profile(sp, lambda, y, opts);
  return -prof.psi() + lambda * prof.integral(0.0, y, true, true);
}

double case_c_residual(const KreinString& s, double lambda, const PsiOptions& opts) {
  const StringClass cls = classify(s);
  if (cls.variant != StringCase::CaseC) fail(ErrorKind::WrongCase, "case_c_residual needs a CaseC string");
  if (lambda == 0.0) return std::abs(-psi_zero(s));
  auto sp = std::make_shared<const KreinString>(s);
  const ModeProfile prof = mode_profile(sp, lambda, s.y1(), opts);
  const double y1 = s.y1();
  const double left_derivative = -prof.psi() + lambda * prof.integral(0.0, y1, true, false);
  return std::abs(left_derivative + lambda * s.m1() * prof.phi(y1));
}

BernsteinFn::BernsteinFn(std::shared_ptr<const KreinString> s, PsiOptions opts)
    : s_(std::move(s)), opts_(opts) {}

PsiValue BernsteinFn::evaluate(double lambda) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = values_.find(lambda); it != values_.end()) return it->second;
  }
  const PsiValue v = psi(*s_, lambda, opts_);
  std::lock_guard<std::mutex> lock(mu_);
  values_.emplace(lambda, v);
  return v;
}

double BernsteinFn::psi0() const { return psi_zero(*s_); }

std::shared_ptr<const ModeProfile> BernsteinFn::profile(double lambda, double y_needed) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = profiles_.find(lambda); it != profiles_.end() && it->second->y_end() >= y_needed)
      return it->second;
  }
  SolveResult r = solve_levels(*s_, lambda, opts_, y_needed, true);
  auto prof = std::make_shared<const ModeProfile>(s_, lambda, r.value.value, std::move(r.levels), r.richardson);
  std::lock_guard<std::mutex> lock(mu_);
  profiles_[lambda] = prof;
  values_.emplace(lambda, r.value);
  return prof;
}

std::vector<PsiValue> BernsteinFn::evaluate_grid(std::span<const double> lambdas) const {
  std::vector<PsiValue> out(lambdas.size());
  parallel_for(lambdas.size(), [&](std::size_t i) { out[i] = evaluate(lambdas[i]); });
  return out;
}

DiagnosticsReport bernstein_diagnostics(std::span<const double> lambdas, std::span<const double> values,
                                        double m0, double rel_tol) {
  if (lambdas.size() != values.size() || lambdas.empty())
    fail(ErrorKind::InvalidArgument, "diagnostics need matching, nonempty grids");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) fail(ErrorKind::InvalidArgument, "lambda grid must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) fail(ErrorKind::InvalidArgument, "lambda grid must increase");
  }
  DiagnosticsReport rep;
  const std::size_t n = lambdas.size();
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  const double atol = rel_tol * std::max(vmax, 1e-300);

  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] < -atol) {
      rep.nonnegative_nondecreasing = false;
      rep.violations.push_back({"nonnegative", lambdas[i], -values[i]});
    }
    if (i > 0 && values[i] < values[i - 1] - atol) {
      rep.nonnegative_nondecreasing = false;
      rep.violations.push_back({"nondecreasing", lambdas[i], values[i - 1] - values[i]});
    }
  }

  // Divided differences: the k-th one carries the sign of psi^(k), i.e. (-1)^(k+1).
  std::vector<double> dd(values.begin(), values.end());
  for (int k = 1; k <= 4 && static_cast<std::size_t>(k) < n; ++k) {
    std::vector<double> next(n - static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = (dd[i + 1] - dd[i]) / (lambdas[i + static_cast<std::size_t>(k)] - lambdas[i]);
    }
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double spread = lambdas[i + static_cast<std::size_t>(k)] - lambdas[i];
      const double noise = atol * std::pow(2.0 / spread, k) * 4.0;
      if (sign * next[i] < -noise) {
        rep.alternating_differences = false;
        rep.violations.push_back({"alternating_order_" + std::to_string(k), lambdas[i], std::abs(next[i])});
      }
    }
    dd = std::move(next);
  }

  bool constant = true;
  const double r0 = values[0] / lambdas[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double r_prev = values[i - 1] / lambdas[i - 1];
    const double r = values[i] / lambdas[i];
    if (r > r_prev * (1.0 + rel_tol) + 1e-300) {
      rep.ratio_nonincreasing = false;
      rep.violations.push_back({"ratio_nonincreasing", lambdas[i], r - r_prev});
    }
    if (std::abs(r - r0) > rel_tol * std::abs(r0)) constant = false;
  }
  rep.ratio_constant = constant && n > 1;

  rep.slope_ratio = values[n - 1] / lambdas[n - 1];
  rep.slope_secant = n >= 2 ? (values[n - 1] - values[n - 2]) / (lambdas[n - 1] - lambdas[n - 2]) : rep.slope_ratio;
  rep.slope_gap = rep.slope_secant - m0;

  rep.linear_constant = r0;
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] > r0 * lambdas[i] * (1.0 + rel_tol) + atol) {
      rep.linear_growth = false;
      rep.violations.push_back({"linear_growth", lambdas[i], values[i] - r0 * lambdas[i]});
    }
  }
  return rep;
}

PhiTable::PhiTable(const BernsteinFn& psi, double y, double lambda_max, int points_per_decade) : y_(y) {
  const KreinString& s = psi.string();
  phi_zero_ = 1.0 - psi.psi0() * y;
  const double lmin = 1e-6;
  lambda_max = std::max(lambda_max, 10.0 * lmin);
  log_min_ = std::log(lmin);
  log_step_ = std::log(10.0) / points_per_decade;
  const auto count = static_cast<std::size_t>(std::ceil((std::log(lambda_max) - log_min_) / log_step_)) + 2;
  log_phi_.assign(count, -745.0);
  values_.assign(count, 0.0);
  std::vector<double> lambdas(count);
  for (std::size_t i = 0; i < count; ++i) lambdas[i] = std::exp(log_min_ + log_step_ * static_cast<double>(i));
  // phi(., y) is nonincreasing in lambda; stop once it underflows.
  for (std::size_t i = 0; i < count; ++i) {
    const double v = psi.profile(lambdas[i], y)->phi(y);
    values_[i] = std::max(v, 0.0);
    if (values_[i] < 1e-300) break;
    log_phi_[i] = std::log(values_[i]);
  }
  (void)s;
}

double PhiTable::operator()(double lambda) const {
  if (lambda <= 0.0) return phi_zero_;
  const double t = (std::log(lambda) - log_min_) / log_step_;
  if (t <= 0.0) {
    const double l0 = std::exp(log_min_);
    return phi_zero_ + (values_[0] - phi_zero_) * (lambda / l0);
  }
  const auto i = static_cast<std::size_t>(t);
  if (i + 1 >= log_phi_.size()) return 0.0;
  const double u = t - static_cast<double>(i);
  if (values_[i + 1] < 1e-300 || values_[i] < 1e-300) {
    return values_[i] * (1.0 - u) + values_[i + 1] * u;
  }
  // Catmull-Rom on log phi where neighbours exist, linear otherwise.
  auto lp = [&](std::ptrdiff_t k) {
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(log_phi_.size()) - 1);
    return log_phi_[static_cast<std::size_t>(k)];
  };
  const auto ii = static_cast<std::ptrdiff_t>(i);
  const double p0 = lp(ii - 1), p1 = lp(ii), p2 = lp(ii + 1), p3 = lp(ii + 2);
  if (i == 0 || p3 <= -745.0 || p0 <= -745.0) return std::exp(p1 + (p2 - p1) * u);
  const double u2 = u * u, u3 = u2 * u;
  const double v = 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                          (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
  return std::exp(v);
}

}  // namespace xtend
