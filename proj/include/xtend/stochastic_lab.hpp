#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "xtend/extension_field.hpp"
#include "xtend/operator_calculus.hpp"
#include "xtend/string_model.hpp"

namespace xtend {

enum class Backend { TimeChange, ReflectedSDE };

/// Monte Carlo settings. Step sizes adapt to the distance from the nearest
/// feature of the string (0, y1, interior atoms) but never drop below `dt`
/// away from a clock target.
struct PathConfig {
  double dt = 1e-4;
  double horizon = 1e6;  // Y-time after which a path is censored
  std::uint64_t master_seed = 1;
  std::size_t n_paths = 10000;
  double epsilon = 0.0;  // occupation bandwidth; 0 selects dt^0.4
  Backend backend = Backend::TimeChange;
  double kappa = 4.0;    // step keeps the path within ~1/kappa of the feature distance
  double dt_max = 1e3;
  std::size_t max_steps = 20'000'000;

  double bandwidth() const;
  /// Raises InvalidArgument unless dt > 0, n_paths > 0 and bandwidth >= sqrt(dt)/4.
  void validate() const;
};

/// Counter-derived seed: paths and streams never share an engine, so results
/// do not depend on the thread count.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream);

inline constexpr std::uint64_t kStreamY = 0;
inline constexpr std::uint64_t kStreamX = 1;

class PathRng {
 public:
  explicit PathRng(std::uint64_t seed) : engine_(seed) {}
  double normal() { return normal_(engine_); }
  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Sampled path of the string diffusion Y on its own clock.
struct StringDiffusionPath {
  std::vector<double> time;
  std::vector<double> y;
  std::vector<double> l0;  // local time at 0, L0(Y) = L0(W)/2
  std::vector<double> l1;  // local time at y1 (CaseC)
  std::optional<double> absorbed_at;  // Y reaches y1 and stays (finite clock)
  bool saturated = false;             // L0 stops growing for good (killing)
  bool horizon_exceeded = false;
};

StringDiffusionPath simulate_Y_time_change(const KreinString& s, const PathConfig& cfg, double y0,
                                           std::uint64_t path_index = 0);
/// Euler steps for dY = sqrt(2/rho(Y)) dB with Skorokhod reflection of each
/// step's Brownian interpolant. BackendUnsupported unless m0 = 0, there are no
/// atoms, and the density is bounded on compacts of [0, y1] (m1 = 0 in CaseC).
StringDiffusionPath simulate_Y_reflected_sde(const KreinString& s, const PathConfig& cfg, double y0,
                                             std::uint64_t path_index = 0);
StringDiffusionPath simulate_Y(const KreinString& s, const PathConfig& cfg, double y0, std::uint64_t path_index = 0);

/// First time L0 reaches t; infinity once L0 has saturated below t.
/// UndeterminedKill when the horizon ends the path first.
double inverse_local_time(const StringDiffusionPath& p, double t);

/// L0 recovered from occupation of [0, eps): time spent there over m0 + m((0, eps)).
double occupation_local_time(const KreinString& s, const StringDiffusionPath& p, double eps);

struct XPath {
  std::vector<double> states;
  bool blowup = false;
};

/// Euler-Maruyama for X at the requested nondecreasing clock times; constant
/// coefficients are sampled exactly. Uses X's own stream.
XPath simulate_X(const DiffusionOperator1D& op, double x0, const std::vector<double>& clock_times,
                 const PathConfig& cfg, std::uint64_t path_index = 0, double bound = 1e8);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;      // paths launched
  std::size_t n_eff = 0;  // paths not censored
  double kill_rate = 0.0;
  double censor_rate = 0.0;
};

/// Mean and standard error of the uncensored values; NaN marks a censored path.
Estimate summarize(const std::vector<double>& values, const std::vector<char>& killed);

struct TraceSample {
  double t = 0.0;
  double T = 0.0;  // infinity when killed, NaN when censored
  bool alive = false;
  double Z = 0.0;  // NaN at the cemetery
  std::size_t path = 0;
};

std::vector<TraceSample> sample_trace_paths(const KreinString& s, const DiffusionOperator1D& op, double x0, double t,
                                            const PathConfig& cfg);

/// Mean of (f(Z(t)) - f(x0)) / t with f(cemetery) = 0. UndeterminedKill when
/// more than 1% of paths are censored.
Estimate sample_trace(const KreinString& s, const DiffusionOperator1D& op, const std::function<double(double)>& f,
                      double x0, double t, const PathConfig& cfg);

/// Mean of exp(-lambda T_t) over alive paths, 0 for killed ones.
Estimate estimate_subordinator_laplace(const KreinString& s, double t, double lambda, const PathConfig& cfg);

struct HittingSample {
  double y = 0.0;
  double tau0 = kInf;
  double tau_y1 = kInf;
  double x_at_tau0 = 0.0;  // NaN unless tau0 is finite and X was simulated
  bool censored = false;
};

std::vector<HittingSample> sample_hitting(const KreinString& s, double y, const PathConfig& cfg,
                                          const DiffusionOperator1D* op = nullptr, double x0 = 0.0);

/// Mean of exp(-lambda tau0) 1{tau0 < tau_y1} over uncensored samples.
Estimate hitting_laplace(const std::vector<HittingSample>& samples, double lambda);

struct HarmonicEstimate {
  std::vector<double> samples;  // sorted X(tau0) over paths reaching 0
  double alive_mass = 0.0;
  double alive_se = 0.0;
  double reference_mass = 0.0;
  double ks = 0.0;
  double censor_rate = 0.0;
  std::size_t n_eff = 0;
};

/// Law of X(tau0(Y^y)) compared with the spectral harmonic measure. X must
/// have constant coefficients drift 0, sigma^2 = 2.
HarmonicEstimate estimate_harmonic_measure(const BernsteinFn& psi, const DiffusionOperator1D& op, double x0, double y,
                                           const PathConfig& cfg);

/// u(x, y) and its boundary flux d+u/dy(x, 0) + m0 L u(x, 0) off the grid.
struct FieldContext {
  std::function<double(double, double)> u;
  std::function<double(double)> flux;
};

/// Cubic interpolation in x of the extension field (periodic on the torus).
FieldContext field_context(const ExtensionSolution& sol);

struct DynkinResult {
  double residual = 0.0;
  double se = 0.0;
  double control = 0.0;  // same paths with the boundary flux raised by 1
  double control_se = 0.0;
  double mean_local_time = 0.0;
  double local_time_se = 0.0;
  std::size_t n_eff = 0;
  double censor_rate = 0.0;
};

/// E[u(X_t, Y_t)] - f(x0) - E[int_0^t flux(X_s) dL0_s]. CaseA strings only.
DynkinResult dynkin_residual(const KreinString& s, const DiffusionOperator1D& op, const FieldContext& u, double x0,
                             double t, const PathConfig& cfg);

struct BandwidthReport {
  double exact = 0.0;                  // mean L0 at the end of the window
  std::vector<double> bandwidths;      // eps / 2, eps, 2 eps
  std::vector<double> occupation;      // mean occupation estimate at each bandwidth
};

BandwidthReport bandwidth_sensitivity(const KreinString& s, const PathConfig& cfg, double y0, double t_end);

}  // namespace xtend
