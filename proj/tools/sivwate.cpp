#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sivwate/analysis.hpp"
#include "sivwate/csv.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_io.hpp"
#include "sivwate/error.hpp"
#include "sivwate/identity_suite.hpp"

namespace fs = std::filesystem;
using namespace sivwate;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cli", "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::io, "cli", "write failed for '" + path.string() + "'");
}

struct AnalyzeArgs {
  std::string config;
  std::string input, output, markdown;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<double> scale, level;
  std::vector<std::string> methods;
  std::vector<double> m_grid;
  std::string strata;
  unsigned workers = 1;
};

int run_analyze(const AnalyzeArgs& a) {
  std::optional<fs::path> report_path;
  try {
    auto config = load_analysis_config(a.config);
    if (!a.input.empty()) config.input = a.input;
    if (!a.output.empty()) config.output = a.output;
    if (!a.markdown.empty()) config.markdown = fs::path(a.markdown);
    if (a.seed) config.seed = *a.seed;
    if (a.replicates) config.replicates = *a.replicates;
    if (a.scale) config.scale = *a.scale;
    if (a.level) config.level = *a.level;
    if (!a.methods.empty()) {
      config.methods.clear();
      for (const auto& m : a.methods) {
        if (m == "wald") config.methods.push_back(Method::wald);
        else if (m == "regression") config.methods.push_back(Method::regression);
        else if (m == "weighting") config.methods.push_back(Method::weighting);
        else throw Error(ErrorKind::config, "cli", "unknown method '" + m + "'");
      }
    }
    if (!a.m_grid.empty()) {
      BoundsConfig b;
      b.mode = BoundsConfig::Mode::multiplier;
      b.value = a.m_grid.front();
      b.m_grid = a.m_grid;
      config.bounds = b;
    }
    if (!a.strata.empty()) {
      if (a.strata == "none") config.strata.reset();
      else config.strata = LevelSpec{a.strata, {}};
    }
    if (config.input.empty()) throw Error(ErrorKind::config, "cli", "input: no dataset given");
    if (config.output.empty()) throw Error(ErrorKind::config, "cli", "output: no report path given");
    report_path = config.output;

    const auto data = load_csv(config.input, config.schema, config.columns);
    const auto report = run_analysis(config, data, a.workers);
    write_text(config.output, report.json);
    if (config.markdown) write_text(*config.markdown, report.markdown);
    std::cout << report.markdown;
    return 0;
  } catch (const Error& e) {
    const auto block = error_report_json(e);
    std::cerr << "error [" << to_string(e.kind()) << ", " << e.origin() << "]: " << e.what() << "\n";
    std::cout << block;
    if (report_path) {
      try {
        write_text(*report_path, block);
      } catch (const Error&) {
      }
    }
    return 1;
  }
}

int run_simulate(const std::string& spec, std::size_t n, std::uint64_t seed, const std::string& out,
                 std::string truth) {
  try {
    const auto dgp = load_dgp_spec(spec);
    const auto data = sample_dataset(dgp, n, seed);
    if (truth.empty()) truth = out + ".truth.json";
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_csv(out_path, data);
    write_text(truth, truth_sidecar_json(dgp));
    std::cout << "wrote " << n << " rows to " << out << " and truth to " << truth << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << ", " << e.origin() << "]: " << e.what() << "\n";
    std::cout << error_report_json(e);
    return 1;
  }
}

void print_summary(const IdentitySummary& s) {
  std::printf("%s: %zu DGPs, max lambda %.6g\n", s.group.c_str(), s.dgps, s.max_lambda);
  std::printf("  %-16s %6s %8s %14s %10s  %s\n", "identity", "cases", "skipped", "max residual",
              "tolerance", "status");
  for (const auto& r : s.rows)
    std::printf("  %-16s %6zu %8zu %14.3e %10.0e  %s\n", r.identity.c_str(), r.cases, r.skipped,
                r.max_residual, r.tolerance, r.passed() ? "ok" : "FAIL");
}

int run_validate(const std::vector<std::string>& specs, bool suite, std::size_t count,
                 std::uint64_t seed, double tolerance) {
  try {
    bool ok = true;
    if (suite) {
      for (const auto& s : builtin_identity_suite(count, seed)) {
        print_summary(s);
        ok = ok && s.passed();
      }
    }
    for (const auto& path : specs) {
      const auto summary = check_identities(path, {load_dgp_spec(path)}, tolerance);
      print_summary(summary);
      ok = ok && summary.passed();
    }
    std::printf("%s\n", ok ? "all identities hold" : "identity check FAILED");
    return ok ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << ", " << e.origin() << "]: " << e.what() << "\n";
    std::cout << error_report_json(e);
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instrumental-variable estimation under stochastic monotonicity"};
  app.require_subcommand(1);

  AnalyzeArgs a;
  auto* analyze = app.add_subcommand("analyze", "Estimate, bound and bootstrap from a CSV dataset");
  analyze->add_option("-c,--config", a.config, "JSON analysis config")->required()->check(CLI::ExistingFile);
  analyze->add_option("-i,--input", a.input, "Override the dataset path");
  analyze->add_option("-o,--output", a.output, "Override the JSON report path");
  analyze->add_option("--markdown", a.markdown, "Write a markdown report here");
  analyze->add_option("--seed", a.seed, "Bootstrap seed (default 1)");
  analyze->add_option("--replicates", a.replicates, "Bootstrap replicates, 0 disables (default 1000)");
  analyze->add_option("--level", a.level, "Confidence level (default 0.95)");
  analyze->add_option("--scale", a.scale, "Multiply effects by this factor, e.g. 1000");
  analyze->add_option("--methods", a.methods, "Subset of: wald regression weighting");
  analyze->add_option("--m-grid", a.m_grid, "Multiplier grid for the ATE bounds");
  analyze->add_option("--strata", a.strata, "Stratify resampling on this covariate ('none' to disable)");
  analyze->add_option("-j,--workers", a.workers, "Bootstrap worker threads")
      ->envname("SIVWATE_WORKERS")
      ->check(CLI::PositiveNumber);

  std::string spec, out, truth;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  auto* simulate = app.add_subcommand("simulate", "Draw a dataset from a DGP spec and write its truth");
  simulate->add_option("-s,--spec", spec, "JSON DGP spec")->required()->check(CLI::ExistingFile);
  simulate->add_option("-n,--n", n, "Number of rows")->required();
  simulate->add_option("--seed", seed, "Sampling seed (default 1)");
  simulate->add_option("-o,--out", out, "Output CSV")->required();
  simulate->add_option("--truth", truth, "Truth sidecar path (default <out>.truth.json)");

  std::vector<std::string> specs;
  bool suite = false;
  std::size_t count = 100;
  std::uint64_t suite_seed = 20240601;
  double tolerance = 1e-10;
  auto* validate = app.add_subcommand("validate", "Check the population identities on DGPs");
  validate->add_option("-s,--spec", specs, "JSON DGP spec(s)")->check(CLI::ExistingFile);
  validate->add_flag("--suite", suite, "Run the built-in random suite");
  validate->add_option("--count", count, "DGPs per suite group (default 100)");
  validate->add_option("--seed", suite_seed, "Suite seed");
  validate->add_option("--tolerance", tolerance, "Residual tolerance (default 1e-10)");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) return run_analyze(a);
  if (simulate->parsed()) return run_simulate(spec, n, seed, out, truth);
  if (!suite && specs.empty()) {
    std::cerr << "validate: give --suite and/or --spec\n";
    return 2;
  }
  return run_validate(specs, suite, count, suite_seed, tolerance);
}
