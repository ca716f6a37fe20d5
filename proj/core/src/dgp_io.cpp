#include "sivwate/dgp_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"
#include "json_support.hpp"

namespace sivwate {

namespace {

using json = nlohmann::ordered_json;
constexpr const char* kOrigin = "dgp_oracle";

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::parse, kOrigin, path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) bad(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) bad(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], at(path, i)));
  return out;
}

Matrix matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) bad(path, "expected a non-empty array of rows");
  Matrix m;
  m.rows = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto row = numbers(v[i], at(path, i));
    if (i == 0) m.cols = row.size();
    if (row.size() != m.cols) bad(at(path, i), "ragged row");
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

CovariateSchema parse_schema(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of covariates");
  std::vector<Covariate> covs;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = at(path, i);
    const json& c = v[i];
    const json& name = field(c, "name", p);
    if (!name.is_string()) bad(join(p, "name"), "expected a string");
    const std::string kind = c.value("kind", std::string("continuous"));
    if (kind == "continuous") {
      covs.push_back(Covariate::continuous(name.get<std::string>()));
    } else if (kind == "categorical") {
      const json& levels = field(c, "levels", p);
      if (!levels.is_array()) bad(join(p, "levels"), "expected an array of strings");
      std::vector<std::string> lv;
      for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!levels[k].is_string()) bad(at(join(p, "levels"), k), "expected a string");
        lv.push_back(levels[k].get<std::string>());
      }
      covs.push_back(Covariate::categorical(name.get<std::string>(), std::move(lv)));
    } else {
      bad(join(p, "kind"), "expected 'continuous' or 'categorical'");
    }
  }
  try {
    return CovariateSchema(std::move(covs));
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

std::vector<std::vector<double>> parse_x_support(const json& v, const CovariateSchema& schema,
                                                 const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of covariate vectors");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = at(path, i);
    const json& row = v[i];
    if (!row.is_array()) bad(p, "expected an array");
    if (row.size() != schema.size())
      bad(p, "expected " + std::to_string(schema.size()) + " covariate values");
    std::vector<double> xv;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j].is_string() && schema[j].kind == CovariateKind::categorical) {
        const auto& lv = schema[j].levels;
        const auto it = std::find(lv.begin(), lv.end(), row[j].get<std::string>());
        if (it == lv.end()) bad(at(p, j), "unknown level '" + row[j].get<std::string>() + "'");
        xv.push_back(static_cast<double>(it - lv.begin()));
      } else {
        xv.push_back(number(row[j], at(p, j)));
      }
    }
    out.push_back(std::move(xv));
  }
  return out;
}

std::vector<std::vector<std::vector<double>>> cube(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array indexed by x");
  std::vector<std::vector<std::vector<double>>> out;
  for (std::size_t x = 0; x < v.size(); ++x) {
    const std::string px = at(path, x);
    if (!v[x].is_array()) bad(px, "expected an array indexed by u");
    std::vector<std::vector<double>> block;
    for (std::size_t u = 0; u < v[x].size(); ++u) block.push_back(numbers(v[x][u], at(px, u)));
    out.push_back(std::move(block));
  }
  return out;
}

LatentDgp parse_latent(const json& root) {
  DgpTables t;
  t.schema = parse_schema(field(root, "covariates", ""), "covariates");
  t.x_support = parse_x_support(field(root, "x_support", ""), t.schema, "x_support");
  const json& u = field(root, "u_support", "");
  if (!u.is_array()) bad("u_support", "expected an array of labels");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i].is_string())
      t.u_support.push_back(u[i].get<std::string>());
    else if (u[i].is_number())
      t.u_support.push_back(u[i].dump());
    else
      bad(at("u_support", i), "expected a label");
  }
  t.p_xu = matrix(field(root, "p_xu", ""), "p_xu");
  t.e_z = numbers(field(root, "e_z", ""), "e_z");
  const json& pd = field(root, "p_d", "");
  t.p_d[0] = matrix(field(pd, "z0", "p_d"), "p_d.z0");
  t.p_d[1] = matrix(field(pd, "z1", "p_d"), "p_d.z1");
  t.y_support = numbers(field(root, "y_support", ""), "y_support");
  const json& ly = field(root, "law_y", "");
  t.law_y[0] = cube(field(ly, "d0", "law_y"), "law_y.d0");
  t.law_y[1] = cube(field(ly, "d1", "law_y"), "law_y.d1");
  return LatentDgp(std::move(t));
}

LatentDgp parse_dcc(const json& root) {
  DccSpec s;
  s.schema = parse_schema(field(root, "covariates", ""), "covariates");
  s.x_support = parse_x_support(field(root, "x_support", ""), s.schema, "x_support");
  s.p_x = numbers(field(root, "p_x", ""), "p_x");
  s.e_z = numbers(field(root, "e_z", ""), "e_z");
  const json& mix = field(root, "class_mix", "");
  if (!mix.is_array()) bad("class_mix", "expected an array indexed by x");
  for (std::size_t x = 0; x < mix.size(); ++x) {
    const auto row = numbers(mix[x], at("class_mix", x));
    if (row.size() != 4) bad(at("class_mix", x), "expected (never, always, complier, defier)");
    s.class_mix.push_back({row[0], row[1], row[2], row[3]});
  }
  s.y_support = numbers(field(root, "y_support", ""), "y_support");
  const json& ly = field(root, "law_y", "");
  for (int d = 0; d < 2; ++d) {
    const std::string key = d == 0 ? "d0" : "d1";
    const auto c = cube(field(ly, key, "law_y"), "law_y." + key);
    for (std::size_t x = 0; x < c.size(); ++x) {
      if (c[x].size() != 4) bad(at("law_y." + key, x), "expected one law per compliance class");
      s.law_y[d].push_back({c[x][0], c[x][1], c[x][2], c[x][3]});
    }
  }
  return make_dcc_dgp(s);
}

json pair_list(const std::vector<std::pair<std::size_t, std::size_t>>& v) {
  json out = json::array();
  for (const auto& [x, u] : v) out.push_back({{"x", x}, {"u", u}});
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

CovariateSchema parse_schema_json(const nlohmann::ordered_json& v, const std::string& path) {
  return parse_schema(v, path);
}

LatentDgp parse_dgp_spec(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, kOrigin, std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) bad("(root)", "expected an object");
  const std::string type = root.value("type", std::string("latent"));
  if (type == "latent") return parse_latent(root);
  if (type == "dcc") return parse_dcc(root);
  bad("type", "expected 'latent' or 'dcc'");
}

LatentDgp load_dgp_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kOrigin, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dgp_spec(buf.str());
}

std::string dgp_spec_to_json(const LatentDgp& dgp) {
  const auto& t = dgp.tables();
  json root;
  root["type"] = "latent";
  json covs = json::array();
  for (const auto& c : t.schema.covariates()) {
    json cj;
    cj["name"] = c.name;
    cj["kind"] = c.kind == CovariateKind::continuous ? "continuous" : "categorical";
    if (c.kind == CovariateKind::categorical) cj["levels"] = c.levels;
    covs.push_back(std::move(cj));
  }
  root["covariates"] = std::move(covs);
  root["x_support"] = t.x_support;
  root["u_support"] = t.u_support;
  root["p_xu"] = matrix_json(t.p_xu);
  root["e_z"] = t.e_z;
  root["p_d"] = {{"z0", matrix_json(t.p_d[0])}, {"z1", matrix_json(t.p_d[1])}};
  root["y_support"] = t.y_support;
  root["law_y"] = {{"d0", t.law_y[0]}, {"d1", t.law_y[1]}};
  return root.dump(2) + "\n";
}

std::string truth_sidecar_json(const LatentDgp& dgp) {
  json root;
  const auto report = validate_dgp(dgp);
  root["assumptions"] = {{"iva2", report.iva2},
                         {"iva4", report.iva4},
                         {"violations", pair_list(report.violations)}};
  try {
    const auto truth = population_truth(dgp);
    json t;
    t["sivwate"] = truth.sivwate;
    t["psivwate"] = truth.psivwate;
    t["nsivwate"] = truth.nsivwate ? json(*truth.nsivwate) : json(nullptr);
    t["lambda"] = truth.lambda;
    t["iv_strength"] = truth.iv_strength;
    t["naive_estimand"] = truth.naive_estimand;
    t["weight_table"] = matrix_json(truth.weight_table);
    t["positive_set"] = pair_list(truth.positive_set);
    root["population_truth"] = std::move(t);
  } catch (const Error& e) {
    root["population_truth"] = nullptr;
    root["error"] = {{"origin", e.origin()},
                     {"kind", std::string(to_string(e.kind()))},
                     {"message", e.what()}};
  }
  json cond = json::array();
  const auto ct = conditional_truth(dgp);
  for (std::size_t x = 0; x < ct.size(); ++x) {
    const auto& c = ct[x];
    cond.push_back({{"x", dgp.tables().x_support[x]},
                    {"p_x", c.p_x},
                    {"ate", c.ate},
                    {"sivwate", c.sivwate ? json(*c.sivwate) : json(nullptr)},
                    {"compliance_gap", c.compliance_gap},
                    {"effect_min", c.effect_min},
                    {"effect_max", c.effect_max}});
  }
  root["conditional"] = std::move(cond);
  root["global_ate"] = global_ate(dgp);
  return root.dump(2) + "\n";
}

}  // namespace sivwate
