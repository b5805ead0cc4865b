#include "xtend/string_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xtend/error.hpp"

namespace xtend {

namespace {

// c * (hi^k - lo^k) with relative precision when hi and lo are close.
double power_difference(double lo, double hi, double k) {
  if (hi <= lo) return 0.0;
  if (lo <= 0.0) return std::pow(hi, k);
  return std::pow(lo, k) * std::expm1(k * std::log1p((hi - lo) / lo));
}

// Integral of u^e over [lo, hi], lo >= 0.
double power_integral(double e, double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (std::isinf(hi)) return e >= -1.0 ? kInf : -std::pow(lo, e + 1.0) / (e + 1.0);
  const double k = e + 1.0;
  if (std::abs(k) < 1e-14) {
    if (lo <= 0.0) return kInf;
    return std::log1p((hi - lo) / lo);
  }
  if (lo <= 0.0) return k > 0.0 ? std::pow(hi, k) / k : kInf;
  return power_difference(lo, hi, k) / k;
}

struct TailFit {
  double gamma = 0.0;
  double amplitude = 0.0;
  double r2 = 1.0;
  bool active = false;
};

TailFit fit_tail(const DensitySpec& d, double y1) {
  TailFit fit;
  if (!(y1 < kInf) || d.grid_y.empty() || d.grid_y.back() >= y1 * (1.0 - 1e-14)) return fit;
  const std::size_t n = d.grid_y.size();
  const std::size_t m = std::min<std::size_t>(6, n);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t used = 0;
  for (std::size_t i = n - m; i < n; ++i) {
    if (d.grid_v[i] <= 0.0) continue;
    const double x = std::log(y1 - d.grid_y[i]);
    const double y = std::log(d.grid_v[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    ++used;
  }
  fit.active = true;
  if (used < 2) {
    fit.gamma = 0.0;
    fit.amplitude = d.grid_v.back();
    fit.r2 = 0.0;
    return fit;
  }
  const double un = static_cast<double>(used);
  const double vx = sxx - sx * sx / un;
  const double vy = syy - sy * sy / un;
  const double cxy = sxy - sx * sy / un;
  const double slope = vx > 0 ? cxy / vx : 0.0;
  fit.gamma = -slope;
  fit.amplitude = std::exp((sy - slope * sx) / un);
  fit.r2 = (vx > 0 && vy > 0) ? cxy * cxy / (vx * vy) : 1.0;
  return fit;
}

}  // namespace

std::string_view case_name(StringCase c) {
  switch (c) {
    case StringCase::CaseA: return "CaseA";
    case StringCase::CaseB1: return "CaseB1";
    case StringCase::CaseB2: return "CaseB2";
    case StringCase::CaseC: return "CaseC";
  }
  return "?";
}

DensitySpec DensitySpec::constant(double c) {
  DensitySpec d;
  d.kind = DensityKind::Constant;
  d.scale = c;
  return d;
}

DensitySpec DensitySpec::power(double delta, double c) {
  DensitySpec d;
  d.kind = DensityKind::Power;
  d.scale = c;
  d.exponent = delta;
  return d;
}

DensitySpec DensitySpec::boundary_power(double gamma, double c) {
  DensitySpec d;
  d.kind = DensityKind::BoundaryPower;
  d.scale = c;
  d.exponent = gamma;
  return d;
}

DensitySpec DensitySpec::grid(std::vector<double> y, std::vector<double> v) {
  DensitySpec d;
  d.kind = DensityKind::Grid;
  d.grid_y = std::move(y);
  d.grid_v = std::move(v);
  return d;
}

KreinString::KreinString(double y1, DensitySpec density, double m0, double m1,
                         std::vector<PointMass> atoms, bool infinite_beyond)
    : y1_(y1),
      density_(std::move(density)),
      m0_(m0),
      m1_(m1),
      atoms_(std::move(atoms)),
      infinite_beyond_(infinite_beyond) {
  std::sort(atoms_.begin(), atoms_.end(),
            [](const PointMass& a, const PointMass& b) { return a.y < b.y; });
  validate();
}

void KreinString::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorKind::InvalidString, msg); };
  if (!(y1_ > 0.0)) bad("y1 must be positive");
  if (!(m0_ >= 0.0) || !std::isfinite(m0_)) bad("m0 must be finite and nonnegative");
  if (!(m1_ >= 0.0) || !std::isfinite(m1_)) bad("m1 must be finite and nonnegative");
  if (!finite() && m1_ != 0.0) bad("m1 must vanish when y1 is infinite");
  if (infinite_beyond_ && !finite()) bad("infinite_beyond needs a finite y1");
  if (infinite_beyond_ && m1_ != 0.0) bad("m1 is meaningless when the string jumps to infinity at y1");
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const auto& a = atoms_[i];
    if (!(a.y > 0.0 && a.y < y1_)) bad("interior atoms must lie in (0, y1)");
    if (!(a.w > 0.0) || !std::isfinite(a.w)) bad("atom masses must be finite and positive");
    if (i > 0 && atoms_[i - 1].y == a.y) bad("duplicate atom location");
  }
  const auto& d = density_;
  switch (d.kind) {
    case DensityKind::Constant:
      if (!(d.scale > 0.0) || !std::isfinite(d.scale))
        bad("density must be positive almost everywhere");
      break;
    case DensityKind::Power:
      if (!(d.scale > 0.0) || !std::isfinite(d.scale)) bad("power density scale must be positive");
      if (!(d.exponent > 0.0) || !std::isfinite(d.exponent))
        bad("power exponent must be positive for local finiteness at 0");
      break;
    case DensityKind::BoundaryPower:
      if (!finite()) bad("boundary_power density needs a finite y1");
      if (!(d.scale > 0.0) || !std::isfinite(d.scale)) bad("boundary_power scale must be positive");
      if (!std::isfinite(d.exponent)) bad("boundary_power exponent must be finite");
      break;
    case DensityKind::Grid: {
      if (d.grid_y.size() != d.grid_v.size() || d.grid_y.size() < 2)
        bad("grid density needs at least two (y, value) samples");
      for (std::size_t i = 0; i < d.grid_y.size(); ++i) {
        if (!std::isfinite(d.grid_y[i]) || !std::isfinite(d.grid_v[i])) bad("grid samples must be finite");
        if (d.grid_v[i] < 0.0) bad("grid density must be nonnegative");
        if (d.grid_y[i] < 0.0 || d.grid_y[i] > y1_) bad("grid samples must lie in [0, y1]");
        if (i > 0 && !(d.grid_y[i] > d.grid_y[i - 1])) bad("grid abscissae must increase strictly");
        if (i > 0 && d.grid_v[i] == 0.0 && d.grid_v[i - 1] == 0.0)
          bad("grid density vanishes on an interval");
      }
      if (d.grid_v.front() == 0.0 && d.grid_y.front() > 0.0) bad("grid density vanishes near 0");
      if (d.grid_v.back() == 0.0 && d.grid_y.back() < y1_) bad("grid density vanishes near y1");
      break;
    }
  }
}

double KreinString::R() const {
  if (!finite()) return kInf;
  if (infinite_beyond_) return y1_;
  return std::isinf(ac_mass(0.0, y1_)) ? y1_ : kInf;
}

double KreinString::grid_value(double y) const {
  const auto& gy = density_.grid_y;
  const auto& gv = density_.grid_v;
  if (y <= gy.front()) return gv.front();
  if (y >= gy.back()) {
    const TailFit fit = fit_tail(density_, y1_);
    if (!fit.active) return gv.back();
    if (y >= y1_) return fit.gamma > 0 ? kInf : fit.amplitude;
    return fit.amplitude * std::pow(y1_ - y, -fit.gamma);
  }
  const auto it = std::upper_bound(gy.begin(), gy.end(), y);
  const std::size_t i = static_cast<std::size_t>(it - gy.begin()) - 1;
  const double t = (y - gy[i]) / (gy[i + 1] - gy[i]);
  return gv[i] + t * (gv[i + 1] - gv[i]);
}

double KreinString::density(double y) const {
  const auto& d = density_;
  switch (d.kind) {
    case DensityKind::Constant: return d.scale;
    case DensityKind::Power:
      if (y <= 0.0) return d.exponent < 1.0 ? kInf : (d.exponent == 1.0 ? d.scale : 0.0);
      return d.scale * d.exponent * std::pow(y, d.exponent - 1.0);
    case DensityKind::BoundaryPower: {
      const double u = y1_ - y;
      if (u <= 0.0) return d.exponent > 0.0 ? kInf : (d.exponent == 0.0 ? d.scale : 0.0);
      return d.scale * std::pow(u, -d.exponent);
    }
    case DensityKind::Grid: return grid_value(y);
  }
  return 0.0;
}

// order 0: integral of rho; order 1: integral of y * rho; order 2: integral
// of (y1 - y) * rho; over [a, b].
double KreinString::grid_integral(double a, double b, int order) const {
  if (order == 2) {
    const double body_hi = std::min(b, density_.grid_y.back());
    double total = 0.0;
    if (body_hi > a) total += y1_ * grid_integral(a, body_hi, 0) - grid_integral(a, body_hi, 1);
    if (b > body_hi) {
      const double lo = std::max(a, body_hi);
      const TailFit fit = fit_tail(density_, y1_);
      if (!fit.active) {
        total += y1_ * grid_integral(lo, b, 0) - grid_integral(lo, b, 1);
      } else {
        total += fit.amplitude * power_integral(1.0 - fit.gamma, y1_ - b, y1_ - lo);
      }
    }
    return total;
  }
  const auto& gy = density_.grid_y;
  const auto& gv = density_.grid_v;
  double total = 0.0;
  // Left constant extension.
  if (a < gy.front()) {
    const double hi = std::min(b, gy.front());
    total += order == 0 ? gv.front() * (hi - a) : gv.front() * 0.5 * (hi * hi - a * a);
  }
  // Piecewise-linear body; Simpson is exact for the quadratic y * rho.
  for (std::size_t i = 0; i + 1 < gy.size(); ++i) {
    const double lo = std::max(a, gy[i]);
    const double hi = std::min(b, gy[i + 1]);
    if (hi <= lo) continue;
    const double flo = grid_value(lo), fhi = grid_value(hi), mid = 0.5 * (lo + hi);
    const double fmid = 0.5 * (flo + fhi);
    if (order == 0) {
      total += 0.5 * (flo + fhi) * (hi - lo);
    } else {
      total += (hi - lo) / 6.0 * (lo * flo + 4.0 * mid * fmid + hi * fhi);
    }
  }
  // Right extension: constant for y1 = infinity, fitted power law otherwise.
  if (b > gy.back()) {
    const double lo = std::max(a, gy.back());
    const TailFit fit = fit_tail(density_, y1_);
    if (!fit.active) {
      if (std::isinf(b)) return kInf;
      total += order == 0 ? gv.back() * (b - lo) : gv.back() * 0.5 * (b * b - lo * lo);
    } else {
      const double ulo = y1_ - b, uhi = y1_ - lo;
      const double m = fit.amplitude * power_integral(-fit.gamma, ulo, uhi);
      if (order == 0) {
        total += m;
      } else {
        total += y1_ * m - fit.amplitude * power_integral(1.0 - fit.gamma, ulo, uhi);
      }
    }
  }
  return total;
}

double KreinString::ac_mass(const Cell& c) const {
  if (c.len <= 0.0) return 0.0;
  const auto& d = density_;
  switch (d.kind) {
    case DensityKind::Constant:
      return std::isinf(c.len) ? kInf : d.scale * c.len;
    case DensityKind::Power:
      if (std::isinf(c.len)) return kInf;
      return d.scale * power_difference(c.a, c.b(), d.exponent);
    case DensityKind::BoundaryPower:
      return d.scale * power_integral(-d.exponent, std::max(0.0, c.dist_b()), c.dist);
    case DensityKind::Grid:
      return grid_integral(c.a, c.b(), 0);
  }
  return 0.0;
}

double KreinString::ac_moment(const Cell& c) const {
  if (c.len <= 0.0) return 0.0;
  const auto& d = density_;
  switch (d.kind) {
    case DensityKind::Constant:
      return std::isinf(c.len) ? kInf : d.scale * c.len * (c.a + 0.5 * c.len);
    case DensityKind::Power: {
      if (std::isinf(c.len)) return kInf;
      const double k = d.exponent + 1.0;
      return d.scale * d.exponent / k * power_difference(c.a, c.b(), k);
    }
    case DensityKind::BoundaryPower:
      return y1_ * ac_mass(c) - ac_end_moment(c);
    case DensityKind::Grid:
      return grid_integral(c.a, c.b(), 1);
  }
  return 0.0;
}

double KreinString::ac_end_moment(const Cell& c) const {
  if (!finite()) fail(ErrorKind::InvalidArgument, "end moment needs a finite y1");
  if (c.len <= 0.0) return 0.0;
  const auto& d = density_;
  switch (d.kind) {
    case DensityKind::Constant:
      return d.scale * c.len * (c.dist - 0.5 * c.len);
    case DensityKind::BoundaryPower:
      return d.scale * power_integral(1.0 - d.exponent, std::max(0.0, c.dist_b()), c.dist);
    case DensityKind::Grid:
      return grid_integral(c.a, c.b(), 2);
    case DensityKind::Power:
      return y1_ * ac_mass(c) - ac_moment(c);
  }
  return 0.0;
}

Cell KreinString::cell(double a, double b) const {
  Cell c;
  c.a = a;
  c.len = b - a;
  c.dist = finite() ? y1_ - a : kInf;
  return c;
}

double KreinString::ac_mass(double a, double b) const { return ac_mass(cell(a, b)); }

double KreinString::mass(double a, double b, bool closed_left, bool closed_right) const {
  if (!(a >= 0.0 && a <= b && b <= y1_))
    fail(ErrorKind::InvalidArgument, "mass query needs 0 <= a <= b <= y1");
  double total = a < b ? ac_mass(a, b) : 0.0;
  if (a == 0.0 && closed_left) total += m0_;
  for (const auto& atom : atoms_) {
    const bool after_left = atom.y > a || (atom.y == a && closed_left);
    const bool before_right = atom.y < b || (atom.y == b && closed_right);
    if (after_left && before_right) total += atom.w;
  }
  if (finite() && b == y1_ && closed_right) total += infinite_beyond_ ? kInf : m1_;
  return total;
}

StringClass classify(const KreinString& s) {
  StringClass out;
  if (!s.finite()) {
    out.variant = StringCase::CaseA;
    out.total_mass = kInf;
    out.moment = kInf;
    return out;
  }
  const double y1 = s.y1();
  const Cell whole = s.cell(0.0, y1);
  double ac_total = 0.0;
  double ac_moment = 0.0;
  const auto& d = s.density_spec();
  if (d.kind == DensityKind::Grid) {
    const TailFit fit = fit_tail(d, y1);
    if (fit.active) {
      const double margin = 0.15;
      if (fit.r2 < 0.98 && fit.gamma > 0.5)
        fail(ErrorKind::IndeterminateIntegral, "grid density tail does not follow a power law near y1");
      if (std::abs(fit.gamma - 1.0) < margin)
        fail(ErrorKind::IndeterminateIntegral, "grid density tail exponent too close to 1 to decide total mass");
      if (std::abs(fit.gamma - 2.0) < margin)
        fail(ErrorKind::IndeterminateIntegral, "grid density tail exponent too close to 2 to decide the moment");
    }
  }
  ac_total = s.ac_mass(whole);
  ac_moment = s.ac_end_moment(whole);
  double moment = ac_moment + y1 * s.m0();
  for (const auto& a : s.atoms()) moment += (y1 - a.y) * a.w;
  double total = ac_total + s.m0() + s.m1();
  for (const auto& a : s.atoms()) total += a.w;
  if (s.infinite_beyond()) total = kInf;
  out.total_mass = total;
  out.moment = moment;
  if (total < kInf) {
    out.variant = StringCase::CaseC;
  } else if (moment < kInf) {
    out.variant = StringCase::CaseB1;
  } else {
    out.variant = StringCase::CaseB2;
  }
  return out;
}

double AtomicString::mass_up_to(double y) const {
  double total = 0.0;
  for (std::size_t j = 0; j < nodes.size() && nodes[j] <= y; ++j) total += masses[j];
  return total;
}

AtomicString atomize(const KreinString& s, const MeshSpec& spec) {
  if (!(spec.h > 0.0) || !std::isfinite(spec.h)) fail(ErrorKind::InvalidArgument, "mesh spacing must be positive");
  AtomicString out;
  out.mesh = spec;
  std::vector<double> z, d;  // positions and distances to y1

  if (!s.finite()) {
    if (!(spec.y_end > 0.0) || !std::isfinite(spec.y_end))
      fail(ErrorKind::InvalidArgument, "y_end must be finite for strings with y1 = infinity");
    const auto n = static_cast<std::size_t>(std::ceil(spec.y_end / spec.h - 1e-9));
    z.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) z[j] = static_cast<double>(j) * spec.h;
    d.assign(n + 1, kInf);
    out.closure = Closure::Open;
    out.tail_mass = kInf;
  } else {
    const double y1 = s.y1();
    const bool absorbing_density = std::isinf(s.ac_mass(0.0, y1));
    if (s.infinite_beyond() || !absorbing_density) {
      const auto n = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(y1 / spec.h - 1e-9)));
      const double step = y1 / static_cast<double>(n);
      for (std::size_t j = 0; j <= n; ++j) {
        d.push_back(y1 - static_cast<double>(j) * step);
        z.push_back(static_cast<double>(j) * step);
      }
      d.back() = 0.0;
      z.back() = y1;
      out.closure = s.infinite_beyond() ? Closure::Dirichlet : Closure::Neumann;
      out.tail_mass = s.infinite_beyond() ? kInf : 0.0;
    } else {
      double d0 = spec.grade_start > 0.0 ? spec.grade_start : 0.25 * y1;
      d0 = std::min(d0, y1);
      const double eta = spec.eta > 0.0 ? spec.eta : 1e-8 * y1;
      const double uniform_len = y1 - d0;
      std::size_t nu = static_cast<std::size_t>(std::ceil(uniform_len / spec.h - 1e-9));
      const double step = nu > 0 ? uniform_len / static_cast<double>(nu) : spec.h;
      for (std::size_t j = 0; j < nu; ++j) {
        z.push_back(static_cast<double>(j) * step);
        d.push_back(y1 - static_cast<double>(j) * step);
      }
      double q = 1.0 - std::min(step, spec.h) / d0;
      if (!(q > 0.0 && q < 1.0)) q = 0.5;
      double dk = d0;
      while (true) {
        z.push_back(y1 - dk);
        d.push_back(dk);
        if (dk <= eta) break;
        dk *= q;
      }
      if (z.size() < 2) fail(ErrorKind::InvalidArgument, "mesh too small");
      out.closure = Closure::Open;
      out.tail_mass = kInf;
      out.eta = d.back();
    }
  }

  const std::size_t last = z.size() - 1;
  // Interior atoms become dedicated nodes.
  std::vector<bool> used(z.size(), false);
  std::vector<double> atom_mass(z.size(), 0.0);
  for (const auto& atom : s.atoms()) {
    if (!s.finite() && atom.y >= z[last]) continue;  // beyond truncation
    const auto it = std::lower_bound(z.begin(), z.end(), atom.y);
    std::size_t j = static_cast<std::size_t>(it - z.begin());
    if (j > last) j = last;
    if (j > 0 && (j > last || std::abs(z[j - 1] - atom.y) < std::abs(z[j] - atom.y))) --j;
    if (j == 0 || j == last || used[j]) {
      std::ostringstream msg;
      msg << "atom at y=" << atom.y << " cannot be given a dedicated node (h=" << spec.h << ")";
      fail(ErrorKind::MeshTooCoarse, msg.str());
    }
    used[j] = true;
    z[j] = atom.y;
    if (s.finite()) d[j] = s.y1() - atom.y;
    atom_mass[j] += atom.w;
  }

  out.nodes = z;
  out.dist = d;
  out.gaps.resize(last);
  for (std::size_t j = 0; j < last; ++j) {
    out.gaps[j] = s.finite() ? d[j] - d[j + 1] : z[j + 1] - z[j];
  }

  out.masses.assign(z.size(), 0.0);
  for (std::size_t j = 0; j <= last; ++j) {
    const double left = j > 0 ? 0.5 * out.gaps[j - 1] : 0.0;
    const double right = j < last ? 0.5 * out.gaps[j] : 0.0;
    Cell c;
    c.a = z[j] - left;
    c.len = left + right;
    c.dist = d[j] + left;
    out.masses[j] = s.ac_mass(c) + atom_mass[j];
  }
  out.masses[0] += s.m0();
  if (out.closure == Closure::Neumann) out.masses[last] += s.m1();
  return out;
}

}  // namespace xtend
