#include "xtend/canonical.hpp"

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "xtend/error.hpp"

namespace xtend {

using nlohmann::json;

namespace {

double parameter(const std::string& name, const std::string& prefix, double fallback) {
  if (name == prefix) return fallback;
  const std::string rest = name.substr(prefix.size() + 1);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(rest, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidString, "bad parameter in canonical string '" + name + "'");
  }
  if (used != rest.size()) fail(ErrorKind::InvalidString, "bad parameter in canonical string '" + name + "'");
  return v;
}

bool has_prefix(const std::string& name, const std::string& prefix) {
  return name == prefix || name.rfind(prefix + ":", 0) == 0;
}

double number_or_inf(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return kInf;
    fail(ErrorKind::InvalidString, "expected a number or \"inf\", got '" + s + "'");
  }
  if (!v.is_number()) fail(ErrorKind::InvalidString, "expected a number");
  return v.get<double>();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidString, std::string("field '") + key + "': " + e.what());
  }
}

[[noreturn]] void bad(const std::string& m) { fail(ErrorKind::InvalidArgument, "operator spec: " + m); }

std::string expr_text(const json& j, const char* key, const char* fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  return v.get<std::string>();
}

}  // namespace

KreinString canonical_string(const std::string& name) {
  if (name == "lebesgue") return KreinString(kInf, DensitySpec::constant(1.0));
  if (has_prefix(name, "power")) return KreinString(kInf, DensitySpec::power(parameter(name, "power", 0.5)));
  if (has_prefix(name, "sticky"))
    return KreinString(kInf, DensitySpec::constant(1.0), parameter(name, "sticky", 0.7));
  if (has_prefix(name, "finite"))
    return KreinString(parameter(name, "finite", 2.0), DensitySpec::constant(1.0), 0.0, 0.0, {}, true);
  if (name == "b1") return KreinString(1.0, DensitySpec::boundary_power(1.5));
  if (name == "b2") return KreinString(1.0, DensitySpec::boundary_power(2.0));
  if (has_prefix(name, "casec"))
    return KreinString(1.0, DensitySpec::constant(1.0), 0.0, parameter(name, "casec", 0.5));
  fail(ErrorKind::InvalidString, "unknown canonical string '" + name + "'");
}

std::vector<std::string> canonical_names() {
  return {"lebesgue", "power:0.5", "sticky:0.7", "finite:2", "b1", "b2", "casec:0.5"};
}

KreinString string_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidString, "string spec must be a JSON object");
  if (j.contains("canonical")) return canonical_string(get_or<std::string>(j, "canonical", ""));
  if (!j.contains("density")) fail(ErrorKind::InvalidString, "string spec needs 'density'");
  const double y1 = j.contains("y1") ? number_or_inf(j.at("y1")) : kInf;
  const json& d = j.at("density");
  if (!d.is_object()) fail(ErrorKind::InvalidString, "'density' must be an object");
  const auto kind = get_or<std::string>(d, "kind", "constant");
  const double c = get_or<double>(d, "c", 1.0);
  DensitySpec spec;
  if (kind == "constant") {
    spec = DensitySpec::constant(c);
  } else if (kind == "power") {
    spec = DensitySpec::power(get_or<double>(d, "delta", 1.0), c);
  } else if (kind == "boundary_power") {
    spec = DensitySpec::boundary_power(get_or<double>(d, "gamma", 1.0), c);
  } else if (kind == "grid") {
    spec = DensitySpec::grid(get_or<std::vector<double>>(d, "y", {}), get_or<std::vector<double>>(d, "v", {}));
  } else {
    fail(ErrorKind::InvalidString, "unknown density kind '" + kind + "'");
  }
  std::vector<PointMass> atoms;
  if (j.contains("atoms")) {
    if (!j.at("atoms").is_array()) fail(ErrorKind::InvalidString, "'atoms' must be an array");
    for (const auto& a : j.at("atoms")) atoms.push_back({get_or<double>(a, "y", 0.0), get_or<double>(a, "w", 0.0)});
  }
  return KreinString(y1, spec, get_or<double>(j, "m0", 0.0), get_or<double>(j, "m1", 0.0), atoms,
                     get_or<bool>(j, "infinite_beyond", false));
}

json string_to_json(const KreinString& s) {
  json j;
  j["y1"] = s.finite() ? json(s.y1()) : json("inf");
  const DensitySpec& d = s.density_spec();
  switch (d.kind) {
    case DensityKind::Constant: j["density"] = {{"kind", "constant"}, {"c", d.scale}}; break;
    case DensityKind::Power: j["density"] = {{"kind", "power"}, {"delta", d.exponent}, {"c", d.scale}}; break;
    case DensityKind::BoundaryPower:
      j["density"] = {{"kind", "boundary_power"}, {"gamma", d.exponent}, {"c", d.scale}};
      break;
    case DensityKind::Grid: j["density"] = {{"kind", "grid"}, {"y", d.grid_y}, {"v", d.grid_v}}; break;
  }
  j["m0"] = s.m0();
  j["m1"] = s.m1();
  j["atoms"] = json::array();
  for (const auto& a : s.atoms()) j["atoms"].push_back({{"y", a.y}, {"w", a.w}});
  j["infinite_beyond"] = s.infinite_beyond();
  return j;
}

DiffusionOperator1D operator_from_json(const json& j) {
  if (!j.is_object()) bad("must be a JSON object");
  try {
    const int n = j.value("n", 64);
    if (j.contains("preset")) {
      const auto p = j.at("preset").get<std::string>();
      if (p == "laplacian") return DiffusionOperator1D::laplacian_torus(n, j.value("period", 2.0 * std::numbers::pi));
      if (p == "ou") return DiffusionOperator1D::ornstein_uhlenbeck(n, j.value("half_width", 6.0));
      bad("unknown preset '" + p + "'");
    }
    DiffusionOperator1D op;
    const auto domain = j.value("domain", std::string("torus"));
    if (domain == "torus") op.domain = Domain::Torus;
    else if (domain == "interval") op.domain = Domain::Interval;
    else bad("domain must be torus or interval");
    op.drift = Expression::parse(expr_text(j, "a", "0"));
    op.sigma = Expression::parse(expr_text(j, "sigma", "sqrt(2)"));
    const auto bounds = j.value("bounds", std::vector<double>{0.0, 2.0 * std::numbers::pi});
    if (bounds.size() != 2) bad("bounds must have two entries");
    op.lo = bounds[0];
    op.hi = bounds[1];
    op.n = n;
    return op;
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

json operator_to_json(const DiffusionOperator1D& op) {
  return {{"domain", op.domain == Domain::Torus ? "torus" : "interval"},
          {"a", op.drift.text()},
          {"sigma", op.sigma.text()},
          {"n", op.n},
          {"bounds", {op.lo, op.hi}}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, "'" + path + "': " + e.what());
  }
}

KreinString load_string(const std::string& name_or_path) {
  if (std::filesystem::exists(name_or_path)) {
    json j;
    try {
      j = read_json_file(name_or_path);
    } catch (const Error& e) {
      fail(ErrorKind::InvalidString, e.what());
    }
    return string_from_json(j);
  }
  return canonical_string(name_or_path);
}

}  // namespace xtend
