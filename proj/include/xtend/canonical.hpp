#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "xtend/operator_calculus.hpp"
#include "xtend/string_model.hpp"

namespace xtend {

/// "lebesgue", "power:delta", "sticky:m0", "finite:R", "b1", "b2", "casec:m1".
KreinString canonical_string(const std::string& name);

/// The registry with its default parameters.
std::vector<std::string> canonical_names();

/// {"y1": number | "inf", "density": {...}, "m0", "m1", "atoms", "infinite_beyond"}
/// or {"canonical": name}.
KreinString string_from_json(const nlohmann::json& j);
nlohmann::json string_to_json(const KreinString& s);

/// {"domain": "torus" | "interval", "a": expr, "sigma": expr, "n": int, "bounds": [lo, hi]}
/// or {"preset": "laplacian" | "ou", "n": int}.
DiffusionOperator1D operator_from_json(const nlohmann::json& j);
nlohmann::json operator_to_json(const DiffusionOperator1D& op);

nlohmann::json read_json_file(const std::string& path);

/// A canonical name or a path to a JSON string file.
KreinString load_string(const std::string& name_or_path);

}  // namespace xtend
