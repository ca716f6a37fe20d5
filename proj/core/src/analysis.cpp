#include "sivwate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "json_support.hpp"
#include "report.hpp"
#include "sivwate/sensitivity.hpp"

namespace sivwate {

namespace {

using json = nlohmann::ordered_json;
constexpr const char* kOrigin = "cli";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::config, kOrigin, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(path.empty() ? "config" : path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      bad(join(path, k), "unknown field");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "expected a string");
  return v.get<std::string>();
}

std::uint64_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

RegressionSpec parse_model(const json& v, const std::string& path, RegressionSpec spec) {
  if (v.is_string()) {
    const auto d = v.get<std::string>();
    if (d == "saturated") spec.design = DesignKind::saturated;
    else if (d == "main-effects") spec.design = DesignKind::main_effects;
    else if (d == "intercept") spec.design = DesignKind::intercept_only;
    else spec.design = DesignKind::formula, spec.terms = parse_formula(d);
    return spec;
  }
  only_keys(v, path, {"family", "design", "formula", "max_iterations", "tolerance", "ridge"});
  if (v.contains("family")) {
    const auto f = text(v["family"], join(path, "family"));
    if (f == "automatic") spec.family = Family::automatic;
    else if (f == "logistic") spec.family = Family::logistic;
    else if (f == "linear") spec.family = Family::linear;
    else bad(join(path, "family"), "expected automatic, logistic or linear");
  }
  if (v.contains("design")) {
    const auto d = text(v["design"], join(path, "design"));
    if (d == "saturated") spec.design = DesignKind::saturated;
    else if (d == "main-effects") spec.design = DesignKind::main_effects;
    else if (d == "intercept") spec.design = DesignKind::intercept_only;
    else if (d == "formula") spec.design = DesignKind::formula;
    else bad(join(path, "design"), "expected saturated, main-effects, intercept or formula");
  }
  if (v.contains("formula")) {
    spec.design = DesignKind::formula;
    try {
      spec.terms = parse_formula(text(v["formula"], join(path, "formula")));
    } catch (const Error& e) {
      bad(join(path, "formula"), e.what());
    }
  }
  if (v.contains("max_iterations"))
    spec.controls.max_iterations = static_cast<int>(count(v["max_iterations"], join(path, "max_iterations")));
  if (v.contains("tolerance")) spec.controls.tolerance = number(v["tolerance"], join(path, "tolerance"));
  if (v.contains("ridge")) spec.controls.ridge = number(v["ridge"], join(path, "ridge"));
  return spec;
}

NuisanceSpecs parse_nuisance(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto d = v.get<std::string>();
    if (d == "saturated") return NuisanceSpecs::saturated();
    if (d == "main-effects") return NuisanceSpecs::main_effects();
    if (d == "intercept") return NuisanceSpecs::intercept_only();
    bad(path, "expected saturated, main-effects, intercept or an object");
  }
  only_keys(v, path, {"outcome", "treatment", "instrument"});
  auto specs = NuisanceSpecs::main_effects();
  if (v.contains("outcome")) specs.outcome = parse_model(v["outcome"], join(path, "outcome"), specs.outcome);
  if (v.contains("treatment"))
    specs.treatment = parse_model(v["treatment"], join(path, "treatment"), specs.treatment);
  if (v.contains("instrument"))
    specs.instrument = parse_model(v["instrument"], join(path, "instrument"), specs.instrument);
  return specs;
}

LevelSpec parse_levels(const json& v, const std::string& path) {
  if (v.is_string()) return {v.get<std::string>(), {}};
  only_keys(v, path, {"covariate", "cutpoints", "fit"});
  if (!v.contains("covariate")) bad(join(path, "covariate"), "missing field");
  LevelSpec s{text(v["covariate"], join(path, "covariate")), {}};
  if (v.contains("cutpoints")) s.cutpoints = numbers(v["cutpoints"], join(path, "cutpoints"));
  return s;
}

OutcomeTransform parse_transform(const json& v, const std::string& path) {
  if (v.is_string() && v.get<std::string>() == "identity") return OutcomeTransform::identity();
  if (v.is_object()) {
    only_keys(v, path, {"type", "threshold"});
    const auto type = v.contains("type") ? text(v["type"], join(path, "type")) : std::string("indicator");
    if (type == "identity") return OutcomeTransform::identity();
    if (type == "indicator") {
      if (!v.contains("threshold")) bad(join(path, "threshold"), "missing field");
      return OutcomeTransform::indicator(number(v["threshold"], join(path, "threshold")));
    }
  }
  bad(path, "expected \"identity\" or {\"type\": \"indicator\", \"threshold\": t}");
}

json levels_json(const LevelSpec& s) {
  json j;
  j["covariate"] = s.covariate;
  if (!s.cutpoints.empty()) j["cutpoints"] = s.cutpoints;
  return j;
}

json model_json(const RegressionSpec& s) {
  json j;
  j["family"] = to_string(s.family);
  j["design"] = to_string(s.design);
  if (s.design == DesignKind::formula) {
    std::string f;
    for (const auto& term : s.terms) {
      if (!f.empty()) f += " + ";
      for (std::size_t k = 0; k < term.size(); ++k) f += (k ? ":" : "") + term[k];
    }
    j["formula"] = f;
  }
  if (s.design != DesignKind::saturated) {
    j["max_iterations"] = s.controls.max_iterations;
    j["tolerance"] = s.controls.tolerance;
    j["ridge"] = s.controls.ridge;
  }
  return j;
}

json config_echo(const AnalysisConfig& c) {
  json j;
  j["input"] = c.input.filename().string();
  json cov = json::array();
  for (const auto& v : c.schema.covariates()) {
    json e;
    e["name"] = v.name;
    e["kind"] = v.kind == CovariateKind::categorical ? "categorical" : "continuous";
    if (v.kind == CovariateKind::categorical) e["levels"] = v.levels;
    cov.push_back(e);
  }
  j["covariates"] = cov;
  j["nuisance"] = {{"outcome", model_json(c.nuisance.outcome)},
                   {"treatment", model_json(c.nuisance.treatment)},
                   {"instrument", model_json(c.nuisance.instrument)}};
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  json transforms = json::array();
  for (const auto& t : c.transforms) transforms.push_back(t.name());
  j["transforms"] = transforms;
  if (c.subgroup) {
    auto s = levels_json(*c.subgroup);
    s["fit"] = c.subgroup_fit == SubgroupFit::shared ? "shared" : "per-level";
    j["subgroup"] = s;
  }
  j["bootstrap"] = {{"replicates", c.replicates},
                    {"seed", c.seed},
                    {"level", c.level},
                    {"max_failure_fraction", c.max_failure_fraction},
                    {"strata", c.strata ? levels_json(*c.strata) : json(nullptr)}};
  if (c.bounds) {
    if (c.bounds->mode == BoundsConfig::Mode::absolute_range)
      j["bounds"] = {{"mode", "absolute"}, {"r", c.bounds->value}};
    else
      j["bounds"] = {{"mode", "multiplier"},
                     {"m_grid", c.bounds->m_grid.empty() ? std::vector<double>{c.bounds->value}
                                                         : c.bounds->m_grid}};
  }
  if (c.sensitivity) {
    j["sensitivity"] = {{"numerator", c.sensitivity->numerator},
                        {"denominator", c.sensitivity->denominator
                                            ? json(*c.sensitivity->denominator)
                                            : json("estimate")},
                        {"effect_gap_bound", c.sensitivity->effect_gap_bound}};
  }
  j["estimator"] = {{"weak_iv_threshold", c.estimator.weak_iv_threshold},
                    {"propensity_clamp", c.estimator.propensity_clamp},
                    {"max_clamped_fraction", c.estimator.max_clamped_fraction}};
  j["scale"] = c.scale;
  return j;
}

// ---------------------------------------------------------------------------
// Per-sample evaluation shared by the full-data pass and every replicate.

class Context {
 public:
  Context(const ObservedDataset& data, const AnalysisConfig& config)
      : data_(data), config_(config) {}

  const ObservedDataset& data() const { return data_; }

  const FittedNuisance& nuisance() {
    return cached(nuisance_, nuisance_error_, [&] { return fit_nuisance(data_, config_.nuisance); });
  }
  const UnitEffects& units() {
    return cached(units_, units_error_,
                  [&] { return unit_effects(data_, nuisance(), config_.estimator); });
  }
  const std::vector<SubgroupEstimate>& subgroups() {
    return cached(subgroups_, subgroups_error_, [&] {
      return estimate_subgroup_sivwate(data_, nuisance(), config_.subgroup->build(data_.schema()),
                                       config_.estimator, config_.subgroup_fit);
    });
  }
  const ObservedDataset& transformed(std::size_t t) {
    auto& slot = transformed_[t];
    if (!slot) {
      std::vector<double> y(data_.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = config_.transforms[t](data_.y(i));
      slot = data_.with_outcomes(std::move(y));
    }
    return *slot;
  }

 private:
  template <class T, class F>
  const T& cached(std::optional<T>& slot, std::exception_ptr& err, F make) {
    if (err) std::rethrow_exception(err);
    if (!slot) {
      try {
        slot = make();
      } catch (...) {
        err = std::current_exception();
        throw;
      }
    }
    return *slot;
  }

  const ObservedDataset& data_;
  const AnalysisConfig& config_;
  std::optional<FittedNuisance> nuisance_;
  std::optional<UnitEffects> units_;
  std::optional<std::vector<SubgroupEstimate>> subgroups_;
  std::exception_ptr nuisance_error_, units_error_, subgroups_error_;
  std::map<std::size_t, std::optional<ObservedDataset>> transformed_;
};

struct Item {
  std::function<EstimateReport(Context&)> eval;
};

const char* arm_name(Arm a) {
  switch (a) {
    case Arm::treated: return "treated";
    case Arm::untreated: return "untreated";
    case Arm::difference: return "difference";
  }
  return "?";
}

std::string quantity(Arm a, const OutcomeTransform& g) {
  const bool id = g.tag() == OutcomeTransform::Tag::identity;
  const std::string y1 = id ? "Y(1)" : "g(Y(1))", y0 = id ? "Y(0)" : "g(Y(0))";
  switch (a) {
    case Arm::treated: return "E_Q[" + y1 + "]";
    case Arm::untreated: return "E_Q[" + y0 + "]";
    case Arm::difference: return "E_Q[" + y1 + " - " + y0 + "]";
  }
  return "?";
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool replicate_failure(ErrorKind k) {
  return k == ErrorKind::weak_instrument || k == ErrorKind::empty_cell ||
         k == ErrorKind::positivity || k == ErrorKind::validation ||
         k == ErrorKind::undefined_estimand;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::wald: return "wald";
    case Method::regression: return "regression";
    case Method::weighting: return "weighting";
  }
  return "?";
}

Stratifier LevelSpec::build(const CovariateSchema& schema) const {
  const auto& c = schema[schema.index_of(covariate)];
  if (c.kind == CovariateKind::categorical) {
    if (!cutpoints.empty())
      throw Error(ErrorKind::config, kOrigin,
                  "cutpoints given for categorical covariate '" + covariate + "'");
    return Stratifier::by_covariate(schema, covariate);
  }
  if (cutpoints.empty())
    throw Error(ErrorKind::config, kOrigin,
                "continuous covariate '" + covariate + "' needs cutpoints to define levels");
  return Stratifier::by_cutpoints(schema, covariate, cutpoints);
}

void AnalysisConfig::validate() const {
  if (methods.empty()) throw Error(ErrorKind::config, kOrigin, "at least one method is required");
  if (transforms.empty())
    throw Error(ErrorKind::config, kOrigin, "at least one outcome transform is required");
  if (!(std::isfinite(scale) && scale > 0))
    throw Error(ErrorKind::config, kOrigin, "scale must be a positive number").with_value(scale);
  if (replicates == 1) throw Error(ErrorKind::config, kOrigin, "bootstrap needs 0 or >= 2 replicates");
  if (!(level > 0 && level < 1))
    throw Error(ErrorKind::config, kOrigin, "confidence level must lie in (0, 1)").with_value(level);
  nuisance.outcome.validate();
  nuisance.treatment.validate();
  nuisance.instrument.validate();
  if (subgroup) subgroup->build(schema);
  if (strata) strata->build(schema);
  if (bounds) bounds->validate();
  if (sensitivity) {
    SensitivityInputs in;
    in.defier_weight_numerator = sensitivity->numerator;
    in.effect_gap_bound = sensitivity->effect_gap_bound;
    try {
      in.validate();
      if (sensitivity->denominator) lambda_value(sensitivity->numerator, *sensitivity->denominator);
      else lambda_value(sensitivity->numerator, 1.0);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, kOrigin, std::string("sensitivity: ") + e.what());
    }
  }
}

AnalysisConfig parse_analysis_config(std::string_view json_text,
                                     const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, kOrigin, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "", {"input", "output", "markdown", "covariates", "columns", "nuisance",
                       "methods", "transforms", "subgroup", "profile", "bootstrap", "bounds",
                       "sensitivity", "estimator", "scale", "decimals"});
  AnalysisConfig c;
  if (root.contains("input")) c.input = resolve(base_dir, text(root["input"], "input"));
  if (root.contains("output")) c.output = resolve(base_dir, text(root["output"], "output"));
  if (root.contains("markdown")) c.markdown = resolve(base_dir, text(root["markdown"], "markdown"));
  if (root.contains("covariates")) {
    try {
      c.schema = parse_schema_json(root["covariates"], "covariates");
    } catch (const Error& e) {
      throw Error(ErrorKind::config, kOrigin, e.what());
    }
  }
  if (root.contains("columns")) {
    const auto& v = root["columns"];
    only_keys(v, "columns", {"outcome", "treatment", "instrument", "covariates"});
    if (v.contains("outcome")) c.columns.outcome = text(v["outcome"], "columns.outcome");
    if (v.contains("treatment")) c.columns.treatment = text(v["treatment"], "columns.treatment");
    if (v.contains("instrument")) c.columns.instrument = text(v["instrument"], "columns.instrument");
    if (v.contains("covariates")) {
      if (!v["covariates"].is_object()) bad("columns.covariates", "expected an object");
      for (const auto& [k, col] : v["covariates"].items())
        c.columns.covariates[k] = text(col, "columns.covariates." + k);
    }
  }
  if (root.contains("nuisance")) c.nuisance = parse_nuisance(root["nuisance"], "nuisance");
  if (root.contains("methods")) {
    const auto& v = root["methods"];
    if (!v.is_array()) bad("methods", "expected an array");
    c.methods.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto p = "methods[" + std::to_string(i) + "]";
      const auto m = text(v[i], p);
      Method method;
      if (m == "wald") method = Method::wald;
      else if (m == "regression") method = Method::regression;
      else if (m == "weighting") method = Method::weighting;
      else bad(p, "expected wald, regression or weighting");
      if (std::find(c.methods.begin(), c.methods.end(), method) == c.methods.end())
        c.methods.push_back(method);
    }
  }
  if (root.contains("transforms")) {
    const auto& v = root["transforms"];
    if (!v.is_array()) bad("transforms", "expected an array");
    c.transforms.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      c.transforms.push_back(parse_transform(v[i], "transforms[" + std::to_string(i) + "]"));
  }
  if (root.contains("subgroup")) {
    const auto& v = root["subgroup"];
    c.subgroup = parse_levels(v, "subgroup");
    if (v.is_object() && v.contains("fit")) {
      const auto f = text(v["fit"], "subgroup.fit");
      if (f == "shared") c.subgroup_fit = SubgroupFit::shared;
      else if (f == "per-level") c.subgroup_fit = SubgroupFit::per_level;
      else bad("subgroup.fit", "expected shared or per-level");
    }
  }
  if (root.contains("profile")) {
    if (!root["profile"].is_boolean()) bad("profile", "expected true or false");
    c.profile = root["profile"].get<bool>();
  }
  if (root.contains("bootstrap")) {
    const auto& v = root["bootstrap"];
    only_keys(v, "bootstrap", {"replicates", "seed", "level", "max_failure_fraction", "strata"});
    if (v.contains("replicates")) c.replicates = count(v["replicates"], "bootstrap.replicates");
    if (v.contains("seed")) c.seed = count(v["seed"], "bootstrap.seed");
    if (v.contains("level")) c.level = number(v["level"], "bootstrap.level");
    if (v.contains("max_failure_fraction"))
      c.max_failure_fraction = number(v["max_failure_fraction"], "bootstrap.max_failure_fraction");
    if (v.contains("strata") && !v["strata"].is_null())
      c.strata = parse_levels(v["strata"], "bootstrap.strata");
  }
  if (root.contains("bounds")) {
    const auto& v = root["bounds"];
    only_keys(v, "bounds", {"mode", "m", "m_grid", "r"});
    BoundsConfig b;
    std::string mode = v.contains("r") ? "absolute" : "multiplier";
    if (v.contains("mode")) mode = text(v["mode"], "bounds.mode");
    if (mode == "absolute") {
      b.mode = BoundsConfig::Mode::absolute_range;
      if (!v.contains("r")) bad("bounds.r", "missing field");
      b.value = number(v["r"], "bounds.r");
    } else if (mode == "multiplier") {
      b.mode = BoundsConfig::Mode::multiplier;
      if (v.contains("m")) b.value = number(v["m"], "bounds.m");
      if (v.contains("m_grid")) b.m_grid = numbers(v["m_grid"], "bounds.m_grid");
      if (!v.contains("m") && !v.contains("m_grid")) bad("bounds.m_grid", "missing field");
    } else {
      bad("bounds.mode", "expected absolute or multiplier");
    }
    c.bounds = b;
  }
  if (root.contains("sensitivity")) {
    const auto& v = root["sensitivity"];
    only_keys(v, "sensitivity", {"numerator", "denominator", "effect_gap_bound"});
    SensitivityConfig s;
    if (!v.contains("numerator")) bad("sensitivity.numerator", "missing field");
    if (!v.contains("effect_gap_bound")) bad("sensitivity.effect_gap_bound", "missing field");
    s.numerator = number(v["numerator"], "sensitivity.numerator");
    s.effect_gap_bound = number(v["effect_gap_bound"], "sensitivity.effect_gap_bound");
    if (v.contains("denominator") && !(v["denominator"].is_string() && v["denominator"] == "estimate"))
      s.denominator = number(v["denominator"], "sensitivity.denominator");
    c.sensitivity = s;
  }
  if (root.contains("estimator")) {
    const auto& v = root["estimator"];
    only_keys(v, "estimator", {"weak_iv_threshold", "propensity_clamp", "max_clamped_fraction"});
    if (v.contains("weak_iv_threshold"))
      c.estimator.weak_iv_threshold = number(v["weak_iv_threshold"], "estimator.weak_iv_threshold");
    if (v.contains("propensity_clamp"))
      c.estimator.propensity_clamp = number(v["propensity_clamp"], "estimator.propensity_clamp");
    if (v.contains("max_clamped_fraction"))
      c.estimator.max_clamped_fraction =
          number(v["max_clamped_fraction"], "estimator.max_clamped_fraction");
  }
  if (root.contains("scale")) c.scale = number(root["scale"], "scale");
  if (root.contains("decimals")) c.decimals = static_cast<int>(count(root["decimals"], "decimals"));
  c.validate();
  return c;
}

AnalysisConfig load_analysis_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kOrigin, "cannot open config '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_analysis_config(s.str(), path.parent_path());
}

AnalysisReport run_analysis(const AnalysisConfig& config, const ObservedDataset& data,
                            unsigned workers) {
  config.validate();
  if (!(data.schema() == config.schema))
    throw Error(ErrorKind::config, kOrigin, "dataset covariates do not match the configured schema");
  const double scale = config.scale;
  const auto& opts = config.estimator;

  // Estimate rows.
  struct Row {
    std::string method, quantity, transform, arm;
    Item item;
  };
  std::vector<Row> rows;
  for (std::size_t t = 0; t < config.transforms.size(); ++t) {
    const auto& g = config.transforms[t];
    const bool id = g.tag() == OutcomeTransform::Tag::identity;
    for (Method m : config.methods) {
      if (m == Method::wald) {
        rows.push_back({"wald", quantity(Arm::difference, g), g.name(), "difference",
                        {[t, id, &opts](Context& c) {
                          return estimate_wald(id ? c.data() : c.transformed(t), opts);
                        }}});
        continue;
      }
      for (Arm arm : {Arm::treated, Arm::untreated, Arm::difference}) {
        Item item;
        if (m == Method::regression) {
          if (id && arm == Arm::difference)
            item.eval = [&opts](Context& c) {
              return estimate_sivwate_regression(c.data(), c.nuisance(), opts);
            };
          else
            item.eval = [&opts, &g, arm](Context& c) {
              return estimate_q_mean(c.data(), c.nuisance(), g, arm, opts);
            };
        } else {
          item.eval = [&opts, &g, arm](Context& c) {
            return estimate_sivwate_weighting(c.data(), *c.nuisance().e, g, opts, arm);
          };
        }
        rows.push_back({to_string(m), quantity(arm, g), g.name(), arm_name(arm), std::move(item)});
      }
    }
  }

  std::vector<std::function<double(Context&)>> stats;
  for (const auto& r : rows) stats.push_back([&r, scale](Context& c) { return r.item.eval(c).point * scale; });

  Context full(data, config);
  std::vector<EstimateReport> reports;
  for (const auto& r : rows) reports.push_back(r.item.eval(full));

  // Subgroups: point estimates per level; failures stay local to the level.
  std::size_t subgroup_base = stats.size();
  std::vector<SubgroupEstimate> subgroup_points;
  std::optional<Stratifier> subgroup_var;
  if (config.subgroup) {
    subgroup_var = config.subgroup->build(data.schema());
    subgroup_points = full.subgroups();
    for (std::size_t l = 0; l < subgroup_points.size(); ++l)
      stats.push_back([l, scale](Context& c) {
        const auto& s = c.subgroups()[l];
        if (!s.report) throw Error(ErrorKind::undefined_estimand, "estimators", s.error.value_or(""));
        return s.report->point * scale;
      });
  }

  // Bounds.
  std::size_t bounds_base = stats.size();
  std::vector<double> parameters;
  std::vector<GlobalBounds> bound_points;
  if (config.bounds) {
    const bool absolute = config.bounds->mode == BoundsConfig::Mode::absolute_range;
    parameters = absolute || config.bounds->m_grid.empty() ? std::vector<double>{config.bounds->value}
                                                           : config.bounds->m_grid;
    // The absolute range is on the report scale; the units are not.
    auto evaluate = [absolute, scale](const UnitEffects& u, double p) {
      return absolute ? global_bounds_absolute(u, p / scale) : global_bounds_multiplier(u, p);
    };
    for (double p : parameters) bound_points.push_back(evaluate(full.units(), p));
    for (double p : parameters) {
      stats.push_back([p, evaluate, scale](Context& c) { return evaluate(c.units(), p).lower * scale; });
      stats.push_back([p, evaluate, scale](Context& c) { return evaluate(c.units(), p).upper * scale; });
    }
  }

  // Bootstrap.
  BootstrapPlan plan;
  plan.replicates = config.replicates;
  plan.seed = config.seed;
  plan.level = config.level;
  plan.max_failure_fraction = config.max_failure_fraction;
  plan.workers = workers;
  if (config.strata) plan.strata = config.strata->build(data.schema());
  std::optional<ReplicateTable> table;
  if (config.replicates > 0) {
    table = run_replicates(
        data, stats.size(),
        [&](const ObservedDataset& sample) {
          Context c(sample, config);
          std::vector<double> out(stats.size(), kNaN);
          for (std::size_t s = 0; s < stats.size(); ++s) {
            try {
              out[s] = stats[s](c);
            } catch (const Error& e) {
              if (!replicate_failure(e.kind())) throw;
            }
          }
          return out;
        },
        plan);
  }

  // Assemble the report.
  json report;
  report["report"] = "sivwate-analysis";
  report["config"] = config_echo(config);
  std::size_t z1 = data.count_instrument(1), treated = 0;
  for (std::size_t i = 0; i < data.size(); ++i) treated += static_cast<std::size_t>(data.d(i));
  report["data"] = {{"rows", data.size()},
                    {"instrument_zero", data.size() - z1},
                    {"instrument_one", z1},
                    {"treated", treated},
                    {"cells", data.cells().size()}};
  report["scale"] = scale;

  std::size_t max_failures = 0;
  json estimates = json::array();
  std::size_t clamped = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& rep = reports[k];
    json e;
    e["method"] = rows[k].method;
    e["quantity"] = rows[k].quantity;
    e["transform"] = rows[k].transform;
    e["arm"] = rows[k].arm;
    e["estimate"] = rep.point * scale;
    if (table) {
      const auto ci = percentile_interval(*table, k, plan);
      e["ci_lower"] = ci.lower;
      e["ci_upper"] = ci.upper;
      e["standard_error"] = ci.standard_error;
      e["bootstrap_failures"] = ci.failures;
      max_failures = std::max(max_failures, ci.failures);
    }
    e["denominator"] = rep.denominator;
    e["n"] = rep.n;
    e["notes"] = rep.notes;
    clamped = std::max(clamped, rep.clamped_rows);
    estimates.push_back(e);
  }
  report["estimates"] = estimates;

  if (config.subgroup) {
    json sg;
    sg["variable"] = subgroup_var->name;
    sg["fit"] = config.subgroup_fit == SubgroupFit::shared ? "shared" : "per-level";
    json levels = json::array();
    for (std::size_t l = 0; l < subgroup_points.size(); ++l) {
      const auto& s = subgroup_points[l];
      json e;
      e["level"] = s.level;
      e["rows"] = s.rows;
      if (s.report) {
        e["estimate"] = s.report->point * scale;
        e["denominator"] = s.report->denominator;
        if (table) {
          try {
            const auto ci = percentile_interval(*table, subgroup_base + l, plan);
            e["ci_lower"] = ci.lower;
            e["ci_upper"] = ci.upper;
            e["bootstrap_failures"] = ci.failures;
          } catch (const Error& err) {
            if (err.kind() != ErrorKind::unstable_bootstrap) throw;
            e["ci_error"] = err.what();
          }
        }
      } else {
        e["estimate"] = nullptr;
        e["error"] = s.error.value_or("");
      }
      levels.push_back(e);
    }
    sg["levels"] = levels;
    report["subgroups"] = sg;
  }

  if (config.profile) {
    json prof = json::array();
    for (const auto& r : weighted_covariate_profile(data, full.nuisance(),
                                                    default_profile(data.schema()), opts)) {
      prof.push_back({{"covariate", r.name},
                      {"weighted_mean", r.weighted},
                      {"mean", r.unweighted},
                      {"ratio", number_or_null(r.ratio)}});
    }
    report["weighted_profile"] = prof;
  }

  if (config.bounds) {
    const bool absolute = config.bounds->mode == BoundsConfig::Mode::absolute_range;
    json b;
    b["mode"] = absolute ? "absolute" : "multiplier";
    json brows = json::array();
    for (std::size_t k = 0; k < parameters.size(); ++k) {
      json e;
      e[absolute ? "r" : "m"] = parameters[k];
      e["lower"] = bound_points[k].lower * scale;
      e["upper"] = bound_points[k].upper * scale;
      if (table) {
        const auto ci = bonferroni_interval(*table, bounds_base + 2 * k, bounds_base + 2 * k + 1, plan);
        e["ci_lower"] = ci.lower;
        e["ci_upper"] = ci.upper;
        e["bootstrap_failures"] = ci.failures;
        max_failures = std::max(max_failures, ci.failures);
      }
      brows.push_back(e);
    }
    b["rows"] = brows;
    b["units_used"] = bound_points.empty() ? 0 : bound_points.front().used;
    b["units_excluded"] = bound_points.empty() ? 0 : bound_points.front().excluded;
    report["bounds"] = b;
  }

  if (config.sensitivity) {
    const auto naive = estimate_sivwate_regression(data, full.nuisance(), opts);
    SensitivityInputs in;
    in.naive_estimate = naive.point * scale;
    in.defier_weight_numerator = config.sensitivity->numerator;
    in.iv_strength_denominator = config.sensitivity->denominator.value_or(naive.denominator);
    in.effect_gap_bound = config.sensitivity->effect_gap_bound;
    const auto r = psivwate_interval(in);
    report["sensitivity"] = {
        {"naive", r.naive},
        {"numerator", in.defier_weight_numerator},
        {"denominator", in.iv_strength_denominator},
        {"denominator_source", config.sensitivity->denominator ? "assumed" : "estimated"},
        {"lambda", r.lambda},
        {"effect_gap_bound", in.effect_gap_bound},
        {"lower", r.lower},
        {"upper", r.upper}};
  }

  json diag;
  json models = json::array();
  for (const auto& d : full.nuisance().diagnostics()) {
    json m{{"model", d.model}, {"method", d.method}, {"rows", d.rows}, {"converged", d.converged}};
    if (d.method == "cell-means") {
      m["cells"] = d.cells;
      m["empty_cells"] = d.empty_cells;
    } else {
      m["iterations"] = d.iterations;
      m["separation"] = d.separation;
      m["ridge"] = d.ridge;
    }
    models.push_back(m);
  }
  diag["nuisance"] = models;
  diag["propensity_clamped_rows"] = clamped;
  diag["bootstrap"] = {{"replicates", config.replicates},
                       {"seed", config.seed},
                       {"level", config.level},
                       {"stratified_by", plan.strata ? json(plan.strata->name) : json(nullptr)},
                       {"max_failures", max_failures}};
  report["diagnostics"] = diag;

  AnalysisReport out;
  out.json = report.dump(2) + "\n";
  int decimals = config.decimals >= 0 ? config.decimals : (scale >= 1000 ? 1 : 4);
  out.markdown = render_markdown(report, decimals);
  return out;
}

std::string error_report_json(const Error& error) {
  json e;
  e["kind"] = std::string(to_string(error.kind()));
  e["origin"] = error.origin();
  e["message"] = error.what();
  if (error.row()) e["row"] = *error.row();
  if (error.value()) e["value"] = number_or_null(*error.value());
  if (error.kind() == ErrorKind::weak_instrument && error.value()) e["denominator"] = *error.value();
  json root;
  root["error"] = e;
  return root.dump(2) + "\n";
}

}  // namespace sivwate
