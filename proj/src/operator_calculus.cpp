#include "xtend/operator_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "xtend/error.hpp"

namespace xtend {

namespace {

// 3-point Gauss-Legendre on [a, b].
template <typename F>
double gauss3(F&& g, double a, double b) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  const double t = std::sqrt(0.6);
  return r * (5.0 / 9.0 * g(c - r * t) + 8.0 / 9.0 * g(c) + 5.0 / 9.0 * g(c + r * t));
}

std::vector<double> psi_of(const BernsteinFn& psi, const std::vector<double>& lambdas) {
  std::map<double, double> unique;
  for (double l : lambdas) unique.emplace(l, 0.0);
  std::vector<double> keys;
  keys.reserve(unique.size());
  for (const auto& kv : unique) keys.push_back(kv.first);
  const auto values = psi.evaluate_grid(keys);
  for (std::size_t i = 0; i < keys.size(); ++i) unique[keys[i]] = values[i].value;
  std::vector<double> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(unique[l]);
  return out;
}

}  // namespace

DiffusionOperator1D DiffusionOperator1D::laplacian_torus(int n, double period) {
  DiffusionOperator1D op;
  op.domain = Domain::Torus;
  op.drift = Expression::constant(0.0);
  op.sigma = Expression::parse("sqrt(2)");
  op.lo = 0.0;
  op.hi = period;
  op.n = n;
  return op;
}

DiffusionOperator1D DiffusionOperator1D::ornstein_uhlenbeck(int n, double half_width) {
  DiffusionOperator1D op;
  op.domain = Domain::Interval;
  op.drift = Expression::parse("-x");
  op.sigma = Expression::parse("sqrt(2)");
  op.lo = -half_width;
  op.hi = half_width;
  op.n = n;
  return op;
}

bool DiffusionOperator1D::is_laplacian() const {
  for (int i = 0; i <= 8; ++i) {
    const double x = lo + (hi - lo) * i / 8.0;
    if (std::abs(a(x)) > 1e-14 || std::abs(s(x) - std::numbers::sqrt2) > 1e-14) return false;
  }
  return true;
}

DiscreteGenerator discretize(const DiffusionOperator1D& op) {
  if (op.n < 8) fail(ErrorKind::InvalidArgument, "operator grid needs n >= 8");
  if (!(op.hi > op.lo) || !std::isfinite(op.hi - op.lo)) fail(ErrorKind::InvalidArgument, "operator bounds must be finite and increasing");
  const int n = op.n;
  const double h = (op.hi - op.lo) / n;
  const double offset = op.domain == Domain::Torus ? 0.0 : 0.5;

  DiscreteGenerator g;
  g.op_ = op;
  g.h_ = h;
  g.x_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.x_[static_cast<std::size_t>(i)] = op.lo + (i + offset) * h;

  auto drift_ratio = [&](double x) {
    const double s = op.s(x);
    return 2.0 * op.a(x) / (s * s);
  };
  for (double x : g.x_) {
    const double s = op.s(x);
    if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(op.a(x)))
      fail(ErrorKind::InvalidArgument, "coefficients must be finite with sigma > 0 on the grid");
  }

  // B = integral of 2a/sigma^2 at nodes and at the right midpoints.
  std::vector<double> B(static_cast<std::size_t>(n)), Bh(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.x_[static_cast<std::size_t>(i)];
    B[static_cast<std::size_t>(i)] = acc;
    const double half = gauss3(drift_ratio, x, x + 0.5 * h);
    Bh[static_cast<std::size_t>(i)] = acc + half;
    acc += half + gauss3(drift_ratio, x + 0.5 * h, x + h);
  }
  if (op.domain == Domain::Torus) {
    double scale = 1.0;
    for (double b : B) scale = std::max(scale, std::abs(b));
    if (std::abs(acc) > 1e-9 * scale)
      fail(ErrorKind::NonRealSpectrum, "drift is not a periodic gradient; the torus generator is not symmetrizable");
  }
  const double bmax = *std::max_element(B.begin(), B.end());

  Eigen::VectorXd m(n);
  Eigen::VectorXd c(n);  // flux coefficient between i and i+1 (wraps on the torus)
  for (int i = 0; i < n; ++i) {
    const double s = op.s(g.x_[static_cast<std::size_t>(i)]);
    m(i) = 2.0 / (s * s) * std::exp(B[static_cast<std::size_t>(i)] - bmax);
    c(i) = std::exp(Bh[static_cast<std::size_t>(i)] - bmax);
    if (!(m(i) > 0.0) || !std::isfinite(m(i)) || !std::isfinite(c(i)))
      fail(ErrorKind::NonRealSpectrum, "speed weight under/overflows on this grid");
  }
  if (op.domain == Domain::Interval) c(n - 1) = 0.0;

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  const double inv_h2 = 1.0 / (h * h);
  for (int i = 0; i < n; ++i) {
    if (c(i) == 0.0) continue;
    const int j = (i + 1) % n;
    const double k = c(i) * inv_h2;
    K(i, i) -= k;
    K(j, j) -= k;
    K(i, j) += k;
    K(j, i) += k;
  }
  g.L_ = m.cwiseInverse().asDiagonal() * K;
  g.w_ = m;

  const Eigen::VectorXd rs = m.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd S = rs.asDiagonal() * K * rs.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) fail(ErrorKind::NonRealSpectrum, "eigensolver did not converge");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(n - 1)));
  const double zero_tol = 1e-11 * scale;
  g.lambda_.resize(n);
  g.E_.resize(n, n);
  // Ascending lambda = descending eigenvalue.
  for (int k = 0; k < n; ++k) {
    const int src = n - 1 - k;
    double lam = -ev(src);
    if (lam < -zero_tol) {
      std::ostringstream msg;
      msg << "positive eigenvalue " << -lam << " after symmetrization";
      fail(ErrorKind::NonRealSpectrum, msg.str());
    }
    if (std::abs(lam) <= zero_tol) lam = 0.0;
    g.lambda_(k) = lam;
    g.E_.col(k) = rs.asDiagonal() * es.eigenvectors().col(src);
  }
  return g;
}

Eigen::VectorXd DiscreteGenerator::coefficients(const Eigen::VectorXd& f) const {
  if (f.size() != size()) fail(ErrorKind::InvalidArgument, "vector length does not match the grid");
  return E_.transpose() * w_.cwiseProduct(f);
}

Eigen::VectorXd DiscreteGenerator::spectral_apply(const Eigen::VectorXd& f,
                                                  const std::function<double(double)>& g) const {
  Eigen::VectorXd c = coefficients(f);
  for (int k = 0; k < c.size(); ++k) c(k) *= g(lambda_(k));
  return E_ * c;
}

double DiscreteGenerator::inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  return (f.cwiseProduct(w_)).dot(g);
}

Eigen::VectorXd sample(const DiscreteGenerator& L, const std::function<double(double)>& f) {
  Eigen::VectorXd v(L.size());
  for (int i = 0; i < L.size(); ++i) v(i) = f(L.grid()[static_cast<std::size_t>(i)]);
  return v;
}

Eigen::VectorXd apply_psi_of_minus_L(const BernsteinFn& psi, const DiscreteGenerator& L, const Eigen::VectorXd& f) {
  const auto& lam = L.lambdas();
  const std::vector<double> ls(lam.data(), lam.data() + lam.size());
  const std::vector<double> ps = psi_of(psi, ls);
  Eigen::VectorXd c = L.coefficients(f);
  for (int k = 0; k < c.size(); ++k) c(k) *= -ps[static_cast<std::size_t>(k)];
  return L.synthesize(c);
}

Eigen::VectorXd heat_semigroup_apply(const DiscreteGenerator& L, double t, const Eigen::VectorXd& f) {
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "t must be >= 0");
  return L.spectral_apply(f, [t](double l) { return std::exp(-l * t); });
}

Eigen::VectorXd subordinate_semigroup_apply(const BernsteinFn& psi, const DiscreteGenerator& L, double t,
                                            const Eigen::VectorXd& f) {
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "t must be >= 0");
  const auto& lam = L.lambdas();
  const std::vector<double> ps = psi_of(psi, std::vector<double>(lam.data(), lam.data() + lam.size()));
  Eigen::VectorXd c = L.coefficients(f);
  for (int k = 0; k < c.size(); ++k) c(k) *= std::exp(-t * ps[static_cast<std::size_t>(k)]);
  return L.synthesize(c);
}

Eigen::VectorXd mixed_semigroup_apply(const DiscreteGenerator& L, const std::vector<double>& taus,
                                      const Eigen::VectorXd& f) {
  if (taus.empty()) fail(ErrorKind::InvalidArgument, "no samples");
  return L.spectral_apply(f, [&](double l) {
    double acc = 0.0;
    for (double tau : taus)
      if (std::isfinite(tau)) acc += std::exp(-l * tau);
    return acc / static_cast<double>(taus.size());
  });
}

namespace {

using cvec = std::vector<std::complex<double>>;

void fft_nd(std::vector<std::complex<double>>& data, int n, int dim, bool inverse) {
  Eigen::FFT<double> fft;
  cvec in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  auto run = [&](std::size_t start, std::size_t stride) {
    for (int i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = data[start + static_cast<std::size_t>(i) * stride];
    if (inverse) fft.inv(out, in); else fft.fwd(out, in);
    for (int i = 0; i < n; ++i) data[start + static_cast<std::size_t>(i) * stride] = out[static_cast<std::size_t>(i)];
  };
  const auto N = static_cast<std::size_t>(n);
  if (dim == 1) {
    run(0, 1);
    return;
  }
  for (std::size_t r = 0; r < N; ++r) run(r * N, 1);
  for (std::size_t col = 0; col < N; ++col) run(col, N);
}

}  // namespace

FourierResult fourier_symbol_apply(const BernsteinFn& psi, const std::vector<double>& f, int dim, double period,
                                   Symbol symbol) {
  if (dim != 1 && dim != 2) fail(ErrorKind::InvalidArgument, "dim must be 1 or 2");
  if (!(period > 0.0)) fail(ErrorKind::InvalidArgument, "period must be positive");
  const auto total = f.size();
  int n = dim == 1 ? static_cast<int>(total) : static_cast<int>(std::lround(std::sqrt(static_cast<double>(total))));
  if (n < 2 || static_cast<std::size_t>(dim == 1 ? n : n * n) != total)
    fail(ErrorKind::InvalidArgument, "grid function size does not match dim");
  const double h = period / n;

  cvec hat(f.begin(), f.end());
  fft_nd(hat, n, dim, false);

  auto freq = [&](int k) { return 2.0 * std::numbers::pi * (k <= n / 2 ? k : k - n) / period; };
  auto sym1 = [&](int k, Symbol which) {
    const double xi = freq(k);
    return which == Symbol::Continuum ? xi * xi : (2.0 - 2.0 * std::cos(xi * h)) / (h * h);
  };
  std::vector<double> sym_c(total), sym_d(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int k1 = static_cast<int>(dim == 1 ? idx : idx / static_cast<std::size_t>(n));
    const int k2 = dim == 1 ? -1 : static_cast<int>(idx % static_cast<std::size_t>(n));
    sym_c[idx] = sym1(k1, Symbol::Continuum) + (k2 >= 0 ? sym1(k2, Symbol::Continuum) : 0.0);
    sym_d[idx] = sym1(k1, Symbol::Discrete) + (k2 >= 0 ? sym1(k2, Symbol::Discrete) : 0.0);
  }
  std::vector<double> all = sym_c;
  all.insert(all.end(), sym_d.begin(), sym_d.end());
  const std::vector<double> ps = psi_of(psi, all);

  auto invert = [&](std::size_t off) {
    cvec g(total);
    for (std::size_t idx = 0; idx < total; ++idx) g[idx] = -ps[off + idx] * hat[idx];
    fft_nd(g, n, dim, true);
    std::vector<double> out(total);
    for (std::size_t idx = 0; idx < total; ++idx) out[idx] = g[idx].real();
    return out;
  };
  const std::vector<double> gc = invert(0);
  const std::vector<double> gd = invert(total);
  FourierResult res;
  res.values = symbol == Symbol::Continuum ? gc : gd;
  for (std::size_t i = 0; i < total; ++i) res.discrete_gap = std::max(res.discrete_gap, std::abs(gc[i] - gd[i]));
  return res;
}

}  // namespace xtend
