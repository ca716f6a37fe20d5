#pragma once

#include <string>

#include <json.hpp>

#include "sivwate/dataset.hpp"

namespace sivwate {

// Array of {"name", "kind", "levels"} objects. Throws a parse error naming `path`.
CovariateSchema parse_schema_json(const nlohmann::ordered_json& v, const std::string& path);

}  // namespace sivwate
