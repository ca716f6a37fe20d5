#include "sivwate/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "sivwate/error.hpp"
#include "sivwate/rng.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "resampling";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_replicate_failure(ErrorKind k) {
  return k == ErrorKind::weak_instrument || k == ErrorKind::empty_cell ||
         k == ErrorKind::positivity || k == ErrorKind::validation ||
         k == ErrorKind::undefined_estimand;
}

std::vector<std::vector<std::size_t>> strata_members(const ObservedDataset& data,
                                                     const BootstrapPlan& plan) {
  if (!plan.strata) {
    std::vector<std::vector<std::size_t>> all(1);
    all[0].resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) all[0][i] = i;
    return all;
  }
  std::vector<std::vector<std::size_t>> groups(plan.strata->levels());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto level = plan.strata->level_of(data.x(i));
    if (level >= groups.size())
      throw Error(ErrorKind::validation, kOrigin,
                  "stratifier '" + plan.strata->name + "' returned an out-of-range level");
    groups[level].push_back(i);
  }
  return groups;
}

void draw(const std::vector<std::vector<std::size_t>>& groups, std::uint64_t seed,
          std::size_t replicate, std::vector<std::size_t>& out) {
  auto gen = make_engine(seed, replicate);
  out.clear();
  for (const auto& g : groups)
    for (std::size_t k = 0; k < g.size(); ++k) out.push_back(g[uniform_index(gen, g.size())]);
}

double standard_deviation(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void check_failures(std::size_t failures, std::size_t total, const BootstrapPlan& plan) {
  const double share = static_cast<double>(failures) / static_cast<double>(total);
  if (share > plan.max_failure_fraction || failures == total) {
    std::ostringstream s;
    s << failures << " of " << total << " bootstrap replicates failed (limit "
      << plan.max_failure_fraction * 100 << "%)";
    throw Error(ErrorKind::unstable_bootstrap, kOrigin, s.str()).with_value(share);
  }
}

}  // namespace

void BootstrapPlan::validate() const {
  if (replicates < 2)
    throw Error(ErrorKind::config, kOrigin, "bootstrap needs at least 2 replicates");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorKind::config, kOrigin, "confidence level must lie in (0, 1)")
        .with_value(level);
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0))
    throw Error(ErrorKind::config, kOrigin, "max_failure_fraction must lie in [0, 1)");
  if (strata && strata->levels() == 0)
    throw Error(ErrorKind::config, kOrigin, "stratifier has no levels");
}

std::vector<std::size_t> resample_rows(const ObservedDataset& data, const BootstrapPlan& plan,
                                       std::size_t replicate) {
  std::vector<std::size_t> rows;
  rows.reserve(data.size());
  draw(strata_members(data, plan), plan.seed, replicate, rows);
  return rows;
}

std::vector<double> ReplicateTable::successful(std::size_t statistic) const {
  std::vector<double> out;
  out.reserve(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const double v = values[statistic * replicates + r];
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

std::size_t ReplicateTable::failures(std::size_t statistic) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < replicates; ++r)
    if (std::isnan(values[statistic * replicates + r])) ++n;
  return n;
}

ReplicateTable run_replicates(const ObservedDataset& data, std::size_t statistics,
                              const MultiStatistic& statistic, const BootstrapPlan& plan) {
  plan.validate();
  const auto groups = strata_members(data, plan);
  for (const auto& g : groups)
    if (g.empty() && plan.strata)
      throw Error(ErrorKind::validation, kOrigin,
                  "a level of stratifier '" + plan.strata->name + "' has no rows");

  ReplicateTable table;
  table.statistics = statistics;
  table.replicates = plan.replicates;
  table.values.assign(statistics * plan.replicates, kNaN);

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto work = [&] {
    std::vector<std::size_t> rows;
    rows.reserve(data.size());
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= plan.replicates) return;
      {
        std::lock_guard lock(fatal_mutex);
        if (fatal) return;
      }
      draw(groups, plan.seed, r, rows);
      try {
        const auto sample = data.subset(rows);
        const auto v = statistic(sample);
        if (v.size() != statistics)
          throw Error(ErrorKind::validation, kOrigin, "statistic returned the wrong arity");
        for (std::size_t s = 0; s < statistics; ++s) table.values[s * plan.replicates + r] = v[s];
      } catch (const Error& e) {
        if (!is_replicate_failure(e.kind())) {
          std::lock_guard lock(fatal_mutex);
          if (!fatal) fatal = std::current_exception();
        }
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(plan.workers, static_cast<unsigned>(plan.replicates)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return table;
}

PercentileInterval percentile_interval(const ReplicateTable& table, std::size_t statistic,
                                       const BootstrapPlan& plan) {
  return bonferroni_interval(table, statistic, statistic, plan);
}

PercentileInterval bonferroni_interval(const ReplicateTable& table, std::size_t lower_statistic,
                                       std::size_t upper_statistic, const BootstrapPlan& plan) {
  const auto lo = table.successful(lower_statistic);
  const auto hi = table.successful(upper_statistic);
  const std::size_t failures =
      std::max(table.failures(lower_statistic), table.failures(upper_statistic));
  check_failures(failures, table.replicates, plan);
  const double alpha = 1.0 - plan.level;
  PercentileInterval out;
  out.lower = quantile(lo, alpha / 2);
  out.upper = quantile(hi, 1.0 - alpha / 2);
  out.level = plan.level;
  out.standard_error = standard_deviation(lower_statistic == upper_statistic ? lo : hi);
  if (lower_statistic != upper_statistic)
    out.standard_error = std::max(standard_deviation(lo), out.standard_error);
  out.replicates = table.replicates;
  out.failures = failures;
  return out;
}

PercentileInterval percentile_ci(const Statistic& statistic, const ObservedDataset& data,
                                 const BootstrapPlan& plan) {
  const auto table = run_replicates(
      data, 1, [&](const ObservedDataset& d) { return std::vector<double>{statistic(d)}; },
      plan);
  return percentile_interval(table, 0, plan);
}

PercentileInterval bonferroni_bounds_ci(const Statistic& lower_statistic,
                                        const Statistic& upper_statistic,
                                        const ObservedDataset& data, const BootstrapPlan& plan) {
  const auto table = run_replicates(
      data, 2,
      [&](const ObservedDataset& d) {
        return std::vector<double>{lower_statistic(d), upper_statistic(d)};
      },
      plan);
  return bonferroni_interval(table, 0, 1, plan);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::validation, kOrigin, "quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0))
    throw Error(ErrorKind::validation, kOrigin, "quantile level must lie in [0, 1]").with_value(q);
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

}  // namespace sivwate
