#pragma once

#include <string>

#include <json.hpp>

namespace sivwate {

// Human-readable rendering of an analysis report; numbers rounded to
// `decimals` places.
std::string render_markdown(const nlohmann::ordered_json& report, int decimals);

}  // namespace sivwate
