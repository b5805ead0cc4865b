#include "xtend/stochastic_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "xtend/error.hpp"
#include "xtend/parallel.hpp"

namespace xtend {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class Top { None, Absorb, Reflect };

/// Boundary behaviour of W at y1 implied by the string's case.
struct StringGeometry {
  Top top = Top::None;
  bool clock_diverges_at_top = false;  // CaseB2: Y never reaches y1
  double y1 = kInf;
  double m0 = 0.0;
  double m1 = 0.0;
  std::vector<PointMass> atoms;

  explicit StringGeometry(const KreinString& s) : y1(s.y1()), m0(s.m0()), m1(s.m1()), atoms(s.atoms()) {
    switch (classify(s).variant) {
      case StringCase::CaseA: top = Top::None; break;
      case StringCase::CaseB1: top = Top::Absorb; break;
      case StringCase::CaseB2:
        top = Top::Absorb;
        clock_diverges_at_top = true;
        break;
      case StringCase::CaseC: top = Top::Reflect; break;
    }
  }

  double feature_distance(double w) const {
    double d = w;
    if (top != Top::None) d = std::min(d, y1 - w);
    for (const auto& a : atoms) d = std::min(d, std::abs(w - a.y));
    return d;
  }
};

/// Mean density over [lo, hi]; robust to integrable singularities at the ends.
double mean_density(const KreinString& s, double lo, double hi) {
  if (hi - lo > 1e-13 * (1.0 + hi)) return s.ac_mass(lo, hi) / (hi - lo);
  return s.density(0.5 * (lo + hi));
}

/// Reflected Brownian step from distance a above a barrier: Levy's
/// representation |B| = M - beta gives the exact joint law of the new distance
/// and the pushed local time.
struct ReflectedStep {
  double dist;
  double push;
};

ReflectedStep reflected_step(double a, double g, double var, PathRng& rng) {
  // The running maximum of -beta over the step exceeds a with probability exp(-2a(a+g)/var).
  const double expo = -2.0 * a * (a + g) / var;
  double push = 0.0;
  if (a + g <= 0.0 || expo > -60.0) {
    const double m = 0.5 * (-g + std::sqrt(g * g - 2.0 * var * std::log(rng.uniform())));
    push = std::max(0.0, m - a);
  }
  return {a + g + push, push};
}

/// Bridge local time at level z (occupation-density normalization) of a
/// Brownian step from a to b with variance var.
double bridge_local_time(double a, double b, double z, double var, PathRng& rng) {
  const double da = std::abs(a - z), db = std::abs(b - z);
  const double expo = -((da + db) * (da + db) - (a - b) * (a - b)) / (2.0 * var);
  if (expo < -60.0) return 0.0;
  return std::max(0.0, std::sqrt((a - b) * (a - b) - 2.0 * var * std::log(rng.uniform())) - da - db);
}

struct StepResult {
  double w_prev = 0.0;
  double a_prev = 0.0;
  double ac_clock = 0.0;  // clock increment from the absolutely continuous part
  double push0 = 0.0;
  double push1 = 0.0;
  bool absorbed = false;
};

/// W is reflected Brownian motion on [0, y1]; Y = W(A^{-1}) with
/// A = (1/2) int L^z(W) m(dz). Local times of Y are half those of W, which is
/// exactly the Levy push of the reflection.
class TimeChangeWalker {
 public:
  TimeChangeWalker(const KreinString& s, const StringGeometry& g, const PathConfig& cfg, double y0, PathRng& rng)
      : s_(s), g_(g), cfg_(cfg), rng_(rng), w(y0) {}

  /// One step; `room` bounds the clock increment of the continuous part.
  StepResult step(double room = kInf) {
    StepResult r{w, A, 0.0, 0.0, 0.0, false};
    const double d = g_.feature_distance(w);
    double dt = std::clamp(d * d / (cfg_.kappa * cfg_.kappa), cfg_.dt, cfg_.dt_max);
    if (room < kInf) {
      const double probe = std::max(std::sqrt(cfg_.dt), 1e-3 * std::max(w, 1e-300));
      const double lo = std::max(0.0, w - probe);
      // Stay clear of y1, where the mass may diverge.
      const double hi = g_.top == Top::None ? w + probe : w + std::min(probe, 0.5 * (g_.y1 - w));
      dt = std::clamp(2.0 * room / std::max(mean_density(s_, lo, hi), 1e-300), 1e-6 * cfg_.dt, dt);
    }
    const double g = std::sqrt(dt) * rng_.normal();
    double w_new;
    const bool near_top = g_.top == Top::Reflect && g_.y1 - w < w;
    if (near_top) {
      const auto st = reflected_step(g_.y1 - w, -g, dt, rng_);
      r.push1 = st.push;
      w_new = std::clamp(g_.y1 - st.dist, 0.0, g_.y1);
    } else {
      const auto st = reflected_step(w, g, dt, rng_);
      r.push0 = st.push;
      w_new = st.dist;
      if (g_.top == Top::Reflect) w_new = std::min(w_new, g_.y1);
    }
    if (g_.top == Top::Absorb) {
      const double da = g_.y1 - w, db = g_.y1 - w_new;
      if (db <= 0.0 || (-2.0 * da * db / dt > -60.0 && rng_.uniform() < std::exp(-2.0 * da * db / dt))) {
        r.absorbed = true;
      }
    }
    double atom_clock = 0.0;
    for (const auto& a : g_.atoms) atom_clock += 0.5 * a.w * bridge_local_time(w, w_new, a.y, dt, rng_);

    if (r.absorbed) {
      // The clock of the final stretch up to y1 is charged as if the step
      // ended just below it; a diverging clock is set when Y never arrives.
      absorbed = true;
      const double hi = std::nextafter(g_.y1, 0.0);
      r.ac_clock = 0.5 * dt * mean_density(s_, std::min(w, hi), hi);
      A = g_.clock_diverges_at_top ? kInf : A + r.ac_clock + atom_clock + g_.m0 * r.push0;
      l0 += r.push0;
      w = g_.y1;
      ++steps;
      return r;
    }
    const double lo = r.push0 > 0.0 ? 0.0 : std::min(w, w_new);
    const double hi = r.push1 > 0.0 ? g_.y1 : std::max(w, w_new);
    r.ac_clock = 0.5 * dt * mean_density(s_, lo, hi);
    A += r.ac_clock + g_.m0 * r.push0 + g_.m1 * r.push1 + atom_clock;
    l0 += r.push0;
    l1 += r.push1;
    w = w_new;
    ++steps;
    return r;
  }

  bool exhausted() const { return steps >= cfg_.max_steps; }

 private:
  const KreinString& s_;
  const StringGeometry& g_;
  const PathConfig& cfg_;
  PathRng& rng_;

 public:
  double w;
  double A = 0.0;
  double l0 = 0.0;
  double l1 = 0.0;
  bool absorbed = false;
  std::size_t steps = 0;
};

/// Advances X along the clock of Y.
class XStepper {
 public:
  XStepper(const DiffusionOperator1D& op, double x0, double dt, PathRng& rng, double bound = 1e8)
      : op_(op), dt_(dt), rng_(rng), bound_(bound), x(x0) {
    constant_ = !op.drift.depends_on_x() && !op.sigma.depends_on_x();
    if (constant_) {
      a0_ = op.drift(0.0);
      s0_ = op.sigma(0.0);
    }
  }

  void advance(double dt) {
    if (!(dt > 0.0) || blowup) return;
    if (constant_) {
      x += a0_ * dt + s0_ * std::sqrt(dt) * rng_.normal();
    } else {
      const double n = std::min(1e6, std::ceil(dt / dt_));
      const double h = dt / n;
      const double sq = std::sqrt(h);
      for (double i = 0; i < n; ++i) {
        x += op_.a(x) * h + op_.s(x) * sq * rng_.normal();
        if (!(std::abs(x) <= bound_)) break;
      }
    }
    if (!(std::abs(x) <= bound_)) blowup = true;
  }

 private:
  const DiffusionOperator1D& op_;
  double dt_;
  PathRng& rng_;
  double bound_;
  bool constant_ = false;
  double a0_ = 0.0, s0_ = 0.0;

 public:
  double x;
  bool blowup = false;
};

void require_y0(const KreinString& s, double y0) {
  if (!(y0 >= 0.0 && y0 < std::min(s.R(), s.y1()))) fail(ErrorKind::InvalidArgument, "start must lie in [0, y1)");
}

void push_sample(StringDiffusionPath& p, double t, double y, double l0, double l1) {
  p.time.push_back(t);
  p.y.push_back(y);
  p.l0.push_back(l0);
  p.l1.push_back(l1);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

double PathConfig::bandwidth() const { return epsilon > 0.0 ? epsilon : std::pow(dt, 0.4); }

void PathConfig::validate() const {
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(horizon > 0.0)) fail(ErrorKind::InvalidArgument, "horizon must be positive");
  if (n_paths == 0) fail(ErrorKind::InvalidArgument, "n_paths must be positive");
  if (!(kappa > 0.0) || !(dt_max >= dt)) fail(ErrorKind::InvalidArgument, "need kappa > 0 and dt_max >= dt");
  if (bandwidth() < 0.25 * std::sqrt(dt)) fail(ErrorKind::InvalidArgument, "bandwidth must be at least sqrt(dt)/4");
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  return mix64(mix64(master ^ 0x6A09E667F3BCC909ULL) + 0x9E3779B97F4A7C15ULL * (2 * index + stream + 1));
}

StringDiffusionPath simulate_Y_time_change(const KreinString& s, const PathConfig& cfg, double y0,
                                           std::uint64_t path_index) {
  cfg.validate();
  require_y0(s, y0);
  const StringGeometry g(s);
  PathRng rng(path_seed(cfg.master_seed, path_index, kStreamY));
  TimeChangeWalker walker(s, g, cfg, y0, rng);
  StringDiffusionPath p;
  push_sample(p, 0.0, y0, 0.0, 0.0);
  while (walker.A < cfg.horizon) {
    if (walker.exhausted()) {
      p.horizon_exceeded = true;
      return p;
    }
    walker.step(cfg.horizon - walker.A);
    if (walker.absorbed) {
      p.saturated = true;
      if (walker.A < kInf) {
        p.absorbed_at = walker.A;
        push_sample(p, walker.A, g.y1, walker.l0, walker.l1);
      } else {
        push_sample(p, cfg.horizon, std::nextafter(g.y1, 0.0), walker.l0, walker.l1);
      }
      return p;
    }
    push_sample(p, walker.A, walker.w, walker.l0, walker.l1);
    if (cfg.horizon - walker.A < 1e-3 * cfg.dt) break;
  }
  p.horizon_exceeded = true;
  return p;
}

StringDiffusionPath simulate_Y_reflected_sde(const KreinString& s, const PathConfig& cfg, double y0,
                                             std::uint64_t path_index) {
  cfg.validate();
  require_y0(s, y0);
  const StringGeometry g(s);
  if (s.m0() != 0.0 || !s.atoms().empty() || s.m1() != 0.0)
    fail(ErrorKind::BackendUnsupported, "reflected SDE backend needs a string without atoms");
  if (g.top == Top::Absorb) fail(ErrorKind::BackendUnsupported, "reflected SDE backend does not model absorption");
  if (s.density_spec().kind == DensityKind::Power && s.density_spec().exponent != 1.0)
    fail(ErrorKind::BackendUnsupported, "reflected SDE backend needs a density bounded near 0");

  PathRng rng(path_seed(cfg.master_seed, path_index, kStreamY));
  StringDiffusionPath p;
  push_sample(p, 0.0, y0, 0.0, 0.0);
  double y = y0, t = 0.0, l0 = 0.0, l1 = 0.0;
  std::size_t steps = 0;
  while (t < cfg.horizon) {
    if (++steps > cfg.max_steps) break;
    const double rho = s.density(y);
    const double d = g.feature_distance(y);
    double dt = std::clamp(rho * d * d / (2.0 * cfg.kappa * cfg.kappa), cfg.dt, cfg.dt_max);
    dt = std::min(dt, cfg.horizon - t);
    const double var = 2.0 * dt / rho;
    const double inc = std::sqrt(var) * rng.normal();
    if (g.top == Top::Reflect && g.y1 - y < y) {
      const auto st = reflected_step(g.y1 - y, -inc, var, rng);
      l1 += st.push;
      y = std::clamp(g.y1 - st.dist, 0.0, g.y1);
    } else {
      const auto st = reflected_step(y, inc, var, rng);
      l0 += st.push;
      y = g.top == Top::Reflect ? std::min(st.dist, g.y1) : st.dist;
    }
    t += dt;
    push_sample(p, t, y, l0, l1);
  }
  p.horizon_exceeded = true;
  return p;
}

StringDiffusionPath simulate_Y(const KreinString& s, const PathConfig& cfg, double y0, std::uint64_t path_index) {
  return cfg.backend == Backend::TimeChange ? simulate_Y_time_change(s, cfg, y0, path_index)
                                            : simulate_Y_reflected_sde(s, cfg, y0, path_index);
}

double inverse_local_time(const StringDiffusionPath& p, double t) {
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "local-time level must be nonnegative");
  const auto it = std::lower_bound(p.l0.begin(), p.l0.end(), t);
  if (it == p.l0.end()) {
    if (p.saturated) return kInf;
    fail(ErrorKind::UndeterminedKill, "horizon reached before the local time level");
  }
  const auto i = static_cast<std::size_t>(it - p.l0.begin());
  if (i == 0) return p.time.front();
  const double dl = p.l0[i] - p.l0[i - 1];
  const double frac = dl > 0.0 ? (t - p.l0[i - 1]) / dl : 1.0;
  return p.time[i - 1] + frac * (p.time[i] - p.time[i - 1]);
}

double occupation_local_time(const KreinString& s, const StringDiffusionPath& p, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "bandwidth must be positive");
  double occ = 0.0;
  for (std::size_t i = 1; i < p.time.size(); ++i) {
    const double dt = p.time[i] - p.time[i - 1];
    if (!(dt < kInf)) continue;
    occ += dt * 0.5 * ((p.y[i - 1] < eps ? 1.0 : 0.0) + (p.y[i] < eps ? 1.0 : 0.0));
  }
  return occ / (s.m0() + s.ac_mass(0.0, std::min(eps, s.y1())));
}

XPath simulate_X(const DiffusionOperator1D& op, double x0, const std::vector<double>& clock_times,
                 const PathConfig& cfg, std::uint64_t path_index, double bound) {
  PathRng rng(path_seed(cfg.master_seed, path_index, kStreamX));
  XStepper x(op, x0, cfg.dt, rng, bound);
  XPath out;
  double t = 0.0;
  for (double target : clock_times) {
    if (!(target >= t)) fail(ErrorKind::InvalidArgument, "clock times must be nondecreasing and nonnegative");
    x.advance(target - t);
    t = target;
    out.states.push_back(x.x);
  }
  out.blowup = x.blowup;
  return out;
}

Estimate summarize(const std::vector<double>& values, const std::vector<char>& killed) {
  Estimate e;
  e.n = values.size();
  std::vector<double> kept;
  std::size_t kills = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    kept.push_back(values[i]);
    if (i < killed.size() && killed[i]) ++kills;
  }
  e.n_eff = kept.size();
  e.mean = mean_of(kept);
  e.se = se_of(kept, e.mean);
  e.kill_rate = e.n_eff ? static_cast<double>(kills) / static_cast<double>(e.n_eff) : 0.0;
  e.censor_rate = e.n ? static_cast<double>(e.n - e.n_eff) / static_cast<double>(e.n) : 0.0;
  return e;
}

std::vector<TraceSample> sample_trace_paths(const KreinString& s, const DiffusionOperator1D& op, double x0, double t,
                                            const PathConfig& cfg) {
  cfg.validate();
  if (!(t > 0.0)) fail(ErrorKind::InvalidArgument, "local-time level must be positive");
  const StringGeometry g(s);
  std::vector<TraceSample> out(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    PathRng rng(path_seed(cfg.master_seed, i, kStreamY));
    TimeChangeWalker walker(s, g, cfg, 0.0, rng);
    TraceSample& ts = out[i];
    ts.t = t;
    ts.path = i;
    ts.T = kNaN;
    ts.Z = kNaN;
    while (walker.A < cfg.horizon && !walker.exhausted()) {
      const double l_prev = walker.l0;
      const auto r = walker.step();
      if (walker.l0 >= t) {
        // Clock at the crossing, interpolated through the step's local-time gain.
        const double frac = (t - l_prev) / (walker.l0 - l_prev);
        ts.T = r.a_prev + frac * (walker.A - r.a_prev);
        ts.alive = true;
        break;
      }
      if (walker.absorbed) {
        ts.T = kInf;
        break;
      }
    }
    if (ts.alive) {
      PathRng xr(path_seed(cfg.master_seed, i, kStreamX));
      XStepper x(op, x0, cfg.dt, xr);
      x.advance(ts.T);
      ts.Z = x.blowup ? kNaN : x.x;
    }
  });
  return out;
}

namespace {

void require_censoring_below(const Estimate& e) {
  if (e.censor_rate > 0.01)
    fail(ErrorKind::UndeterminedKill, "more than 1% of paths reached the horizon undecided");
}

}  // namespace

Estimate sample_trace(const KreinString& s, const DiffusionOperator1D& op, const std::function<double(double)>& f,
                      double x0, double t, const PathConfig& cfg) {
  const auto samples = sample_trace_paths(s, op, x0, t, cfg);
  std::vector<double> v(samples.size());
  std::vector<char> killed(samples.size(), 0);
  const double f0 = f(x0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& ts = samples[i];
    if (std::isnan(ts.T) || (ts.alive && std::isnan(ts.Z))) {
      v[i] = kNaN;
    } else if (!ts.alive) {
      killed[i] = 1;
      v[i] = -f0 / t;
    } else {
      v[i] = (f(ts.Z) - f0) / t;
    }
  }
  const Estimate e = summarize(v, killed);
  require_censoring_below(e);
  return e;
}

Estimate estimate_subordinator_laplace(const KreinString& s, double t, double lambda, const PathConfig& cfg) {
  if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  const DiffusionOperator1D still{Domain::Interval, Expression::constant(0.0), Expression::constant(0.0), -1.0, 1.0, 8};
  const auto samples = sample_trace_paths(s, still, 0.0, t, cfg);
  std::vector<double> v(samples.size());
  std::vector<char> killed(samples.size(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& ts = samples[i];
    if (std::isnan(ts.T)) {
      v[i] = kNaN;
    } else if (!ts.alive) {
      killed[i] = 1;
      v[i] = 0.0;
    } else {
      v[i] = std::exp(-lambda * ts.T);
    }
  }
  const Estimate e = summarize(v, killed);
  require_censoring_below(e);
  return e;
}

std::vector<HittingSample> sample_hitting(const KreinString& s, double y, const PathConfig& cfg,
                                          const DiffusionOperator1D* op, double x0) {
  cfg.validate();
  if (!(y > 0.0 && y < std::min(s.R(), s.y1()))) fail(ErrorKind::InvalidArgument, "start height must lie in (0, y1)");
  const StringGeometry g(s);
  std::vector<HittingSample> out(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    PathRng rng(path_seed(cfg.master_seed, i, kStreamY));
    TimeChangeWalker walker(s, g, cfg, y, rng);
    HittingSample& h = out[i];
    h.y = y;
    h.x_at_tau0 = kNaN;
    h.censored = true;
    while (walker.A < cfg.horizon && !walker.exhausted()) {
      const auto r = walker.step();
      if (r.push0 > 0.0) {
        h.tau0 = r.a_prev + 0.5 * r.ac_clock;
        h.censored = false;
        break;
      }
      if (walker.absorbed) {
        h.tau_y1 = walker.A;
        h.censored = false;
        break;
      }
    }
    if (op && h.tau0 < kInf) {
      PathRng xr(path_seed(cfg.master_seed, i, kStreamX));
      XStepper x(*op, x0, cfg.dt, xr);
      x.advance(h.tau0);
      if (!x.blowup) h.x_at_tau0 = x.x;
    }
  });
  return out;
}

Estimate hitting_laplace(const std::vector<HittingSample>& samples, double lambda) {
  std::vector<double> v(samples.size());
  std::vector<char> killed(samples.size(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& h = samples[i];
    if (h.censored) {
      v[i] = kNaN;
    } else if (h.tau0 < kInf) {
      v[i] = std::exp(-lambda * h.tau0);
    } else {
      killed[i] = 1;
      v[i] = 0.0;
    }
  }
  const Estimate e = summarize(v, killed);
  require_censoring_below(e);
  return e;
}

HarmonicEstimate estimate_harmonic_measure(const BernsteinFn& psi, const DiffusionOperator1D& op, double x0, double y,
                                           const PathConfig& cfg) {
  if (op.drift.depends_on_x() || op.sigma.depends_on_x() || op.drift(0.0) != 0.0 ||
      std::abs(op.sigma(0.0) - std::numbers::sqrt2) > 1e-12)
    fail(ErrorKind::InvalidArgument, "harmonic measure estimate needs the Laplacian");
  const auto samples = sample_hitting(psi.string(), y, cfg, &op, x0);
  HarmonicEstimate out;
  std::size_t censored = 0;
  for (const auto& h : samples) {
    if (h.censored) {
      ++censored;
      continue;
    }
    if (h.tau0 < kInf && !std::isnan(h.x_at_tau0)) out.samples.push_back(h.x_at_tau0 - x0);
  }
  out.n_eff = samples.size() - censored;
  out.censor_rate = static_cast<double>(censored) / static_cast<double>(samples.size());
  if (out.censor_rate > 0.01) fail(ErrorKind::UndeterminedKill, "more than 1% of paths reached the horizon undecided");
  const double n = static_cast<double>(out.n_eff);
  out.alive_mass = static_cast<double>(out.samples.size()) / n;
  out.alive_se = std::sqrt(out.alive_mass * (1.0 - out.alive_mass) / n);
  std::sort(out.samples.begin(), out.samples.end());

  const HarmonicMeasure ref(psi, y);
  out.reference_mass = ref.mass();
  const double m = static_cast<double>(out.samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double F = ref.cdf(out.samples[i]) / ref.mass();
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / m), std::abs(static_cast<double>(i + 1) / m - F)});
  }
  out.ks = ks;
  for (double& v : out.samples) v += x0;
  return out;
}

namespace {

/// Catmull-Rom interpolation of grid values; periodic on the torus, clamped
/// to the end cells on an interval.
double interpolate(const DiscreteGenerator& L, const Eigen::VectorXd& v, double x) {
  const int n = L.size();
  const double h = L.h();
  const double x0 = L.grid().front();
  const bool torus = L.op().domain == Domain::Torus;
  double u = (x - x0) / h;
  if (torus) {
    u = std::fmod(u, static_cast<double>(n));
    if (u < 0.0) u += n;
  } else {
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  }
  const int j = std::min(static_cast<int>(std::floor(u)), n - 1);
  const double t = u - j;
  auto at = [&](int k) {
    if (torus) return v(((k % n) + n) % n);
    return v(std::clamp(k, 0, n - 1));
  };
  const double p0 = at(j - 1), p1 = at(j), p2 = at(j + 1), p3 = at(j + 2);
  return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

}  // namespace

FieldContext field_context(const ExtensionSolution& sol) {
  FieldContext ctx;
  const Eigen::VectorXd flux = dirichlet_to_neumann(sol);
  const DiscreteGenerator& L = sol.generator();
  ctx.u = [&sol, &L](double x, double y) { return interpolate(L, sol.at(y), x); };
  ctx.flux = [flux, &L](double x) { return interpolate(L, flux, x); };
  return ctx;
}

DynkinResult dynkin_residual(const KreinString& s, const DiffusionOperator1D& op, const FieldContext& u, double x0,
                             double t, const PathConfig& cfg) {
  cfg.validate();
  if (classify(s).variant != StringCase::CaseA) fail(ErrorKind::WrongCase, "Dynkin identity needs y1 = infinity");
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "time must be nonnegative");
  DynkinResult out;
  if (t == 0.0) {
    out.n_eff = cfg.n_paths;
    out.control = 0.0;
    return out;
  }
  const StringGeometry g(s);
  const double f0 = u.u(x0, 0.0);
  std::vector<double> res(cfg.n_paths), ctl(cfg.n_paths), loc(cfg.n_paths);
  // Field evaluation is not assumed thread-safe beyond const access of the profiles.
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    PathRng rng(path_seed(cfg.master_seed, i, kStreamY));
    PathRng xr(path_seed(cfg.master_seed, i, kStreamX));
    TimeChangeWalker walker(s, g, cfg, 0.0, rng);
    XStepper x(op, x0, cfg.dt, xr);
    double integral = 0.0;
    const double stop = t - 1e-12 * t;
    while (walker.A < stop && !walker.exhausted()) {
      const double x_prev = x.x;
      const auto r = walker.step(t - walker.A);
      if (r.push0 > 0.0) integral += u.flux(x_prev) * r.push0;
      x.advance(walker.A - r.a_prev);
      if (2.0 * (t - walker.A) < 1e-3 * cfg.dt) break;
    }
    if (walker.A < stop - 1e-3 * cfg.dt || x.blowup) {
      res[i] = ctl[i] = loc[i] = kNaN;
      return;
    }
    res[i] = u.u(x.x, walker.w) - f0 - integral;
    ctl[i] = res[i] - walker.l0;
    loc[i] = walker.l0;
  });
  const std::vector<char> none;
  const Estimate r = summarize(res, none), c = summarize(ctl, none), l = summarize(loc, none);
  out.residual = r.mean;
  out.se = r.se;
  out.control = c.mean;
  out.control_se = c.se;
  out.mean_local_time = l.mean;
  out.local_time_se = l.se;
  out.n_eff = r.n_eff;
  out.censor_rate = r.censor_rate;
  return out;
}

BandwidthReport bandwidth_sensitivity(const KreinString& s, const PathConfig& cfg, double y0, double t_end) {
  PathConfig c = cfg;
  c.horizon = t_end;
  const double eps = cfg.bandwidth();
  BandwidthReport rep;
  rep.bandwidths = {0.5 * eps, eps, 2.0 * eps};
  std::vector<double> exact(cfg.n_paths);
  std::vector<std::array<double, 3>> occ(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    const StringDiffusionPath p = simulate_Y(s, c, y0, i);
    exact[i] = p.l0.back();
    for (std::size_t k = 0; k < 3; ++k) occ[i][k] = occupation_local_time(s, p, rep.bandwidths[k]);
  });
  rep.exact = mean_of(exact);
  rep.occupation.assign(3, 0.0);
  for (const auto& o : occ)
    for (std::size_t k = 0; k < 3; ++k) rep.occupation[k] += o[k] / static_cast<double>(cfg.n_paths);
  return rep;
}

}  // namespace xtend
