#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace sivwate {

namespace {

using json = nlohmann::ordered_json;

std::string fixed(const json& v, int decimals) {
  if (!v.is_number()) return "NA";
  double x = v.get<double>();
  if (!std::isfinite(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  std::string s = buf;
  // Avoid "-0.0".
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

std::string interval(const json& row, int decimals) {
  if (!row.contains("ci_lower")) return "";
  return "(" + fixed(row["ci_lower"], decimals) + ", " + fixed(row["ci_upper"], decimals) + ")";
}

void table(std::ostringstream& out, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows, std::size_t text_columns = 1) {
  out << "|";
  for (const auto& h : header) out << " " << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out << (i < text_columns ? " --- |" : " ---: |");
  out << "\n";
  for (const auto& r : rows) {
    out << "|";
    for (const auto& c : r) out << " " << c << " |";
    out << "\n";
  }
  out << "\n";
}

}  // namespace

std::string render_markdown(const json& report, int decimals) {
  std::ostringstream out;
  const double scale = report.value("scale", 1.0);
  const auto& data = report["data"];
  out << "# IV analysis report\n\n";
  out << "Rows: " << data["rows"].get<std::size_t>() << " (Z=0: "
      << data["instrument_zero"].get<std::size_t>()
      << ", Z=1: " << data["instrument_one"].get<std::size_t>()
      << "); treated: " << data["treated"].get<std::size_t>() << ".";
  if (scale != 1.0) out << " Effects are reported per " << fixed(json(scale), 0) << ".";
  out << "\n\n";

  const auto level = report["diagnostics"]["bootstrap"]["level"].get<double>();
  const std::string ci = fixed(json(level * 100), 0) + "% CI";

  out << "## Estimates\n\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : report["estimates"])
    rows.push_back({e["method"].get<std::string>(), e["quantity"].get<std::string>(),
                    e["transform"].get<std::string>(), fixed(e["estimate"], decimals),
                    interval(e, decimals)});
  table(out, {"Method", "Quantity", "g", "Estimate", ci}, rows, 3);

  if (report.contains("subgroups")) {
    const auto& sg = report["subgroups"];
    out << "## Subgroups by " << sg["variable"].get<std::string>() << "\n\n";
    rows.clear();
    for (const auto& e : sg["levels"]) {
      std::string est = e.contains("error") ? "undefined" : fixed(e["estimate"], decimals);
      rows.push_back({e["level"].get<std::string>(), std::to_string(e["rows"].get<std::size_t>()),
                      est, interval(e, decimals)});
    }
    table(out, {"Level", "Rows", "Estimate", ci}, rows);
  }

  if (report.contains("weighted_profile")) {
    out << "## Covariate profile of the weighted population\n\n";
    rows.clear();
    for (const auto& e : report["weighted_profile"])
      rows.push_back({e["covariate"].get<std::string>(), fixed(e["weighted_mean"], 3),
                      fixed(e["mean"], 3), fixed(e["ratio"], 2)});
    table(out, {"Covariate", "Weighted mean", "Mean", "Ratio"}, rows);
  }

  if (report.contains("bounds")) {
    const auto& b = report["bounds"];
    const bool absolute = b["mode"] == "absolute";
    out << "## Bounds on the average treatment effect\n\n";
    rows.clear();
    for (const auto& e : b["rows"])
      rows.push_back({fixed(e[absolute ? "r" : "m"], absolute ? decimals : 2),
                      fixed(e["lower"], decimals), fixed(e["upper"], decimals),
                      interval(e, decimals)});
    table(out, {absolute ? "r" : "m", "Lower", "Upper", ci}, rows);
    if (b["units_excluded"].get<std::size_t>() > 0)
      out << "Rows excluded for a near-zero fitted treatment-rate gap: "
          << b["units_excluded"].get<std::size_t>() << ".\n\n";
  }

  if (report.contains("sensitivity")) {
    const auto& s = report["sensitivity"];
    out << "## Sensitivity to defiers\n\n";
    out << "lambda = " << fixed(s["numerator"], 4) << " / " << fixed(s["denominator"], 4) << " = "
        << fixed(s["lambda"], 4) << "; effect gap bound " << fixed(s["effect_gap_bound"], decimals)
        << ".\n\n";
    out << "Estimate " << fixed(s["naive"], decimals) << ", range over non-negative-weight strata ("
        << fixed(s["lower"], decimals) << ", " << fixed(s["upper"], decimals) << ").\n\n";
  }

  out << "## Diagnostics\n\n";
  const auto& d = report["diagnostics"];
  rows.clear();
  for (const auto& m : d["nuisance"]) {
    std::string detail = m["method"] == "cell-means"
                             ? std::to_string(m["cells"].get<std::size_t>()) + " cells"
                             : std::to_string(m["iterations"].get<int>()) + " iterations";
    rows.push_back({m["model"].get<std::string>(), m["method"].get<std::string>(),
                    std::to_string(m["rows"].get<std::size_t>()), detail,
                    m["converged"].get<bool>() ? "yes" : "no"});
  }
  table(out, {"Model", "Method", "Rows", "Detail", "Converged"}, rows, 2);
  out << "Propensity clamped on " << d["propensity_clamped_rows"].get<std::size_t>()
      << " rows. Bootstrap: " << d["bootstrap"]["replicates"].get<std::size_t>()
      << " replicates, seed " << d["bootstrap"]["seed"].get<std::uint64_t>()
      << ", at most " << d["bootstrap"]["max_failures"].get<std::size_t>()
      << " failed replicates per statistic.\n";
  return out.str();
}

}  // namespace sivwate
