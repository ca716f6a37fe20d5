#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "oracle.hpp"
#include "sivwate/bootstrap.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"
#include "sivwate/estimators.hpp"
#include "sivwate/rng.hpp"

using namespace sivwate;

namespace {

ObservedDataset sample_data() {
  return sample_dataset(random_dgp({3, 2, 3}, 21, true), 600, 3);
}

double mean_y(const ObservedDataset& ds) {
  double s = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) s += ds.y(i);
  return s / static_cast<double>(ds.size());
}

}  // namespace

TEST_SUITE("resampling") {
  TEST_CASE("quantile examples") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({7}, 0.3) == 7);
    CHECK(quantile({4, 1, 3, 2}, 0.0) == 1);
    CHECK(quantile({4, 1, 3, 2}, 1.0) == 4);
    CHECK_THROWS_AS(quantile({}, 0.5), Error);
    CHECK_THROWS_AS(quantile({1, 2}, 1.5), Error);
  }

  TEST_CASE("quantile agrees with the sort-based reference") {
    auto gen = make_engine(5);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> v(1 + uniform_index(gen, 40));
      for (auto& x : v) x = uniform(gen, -10, 10);
      for (double q : {0.025, 0.1, 0.5, 0.9, 0.975})
        CHECK(quantile(v, q) == doctest::Approx(oracle::sorted_quantile(v, q)).epsilon(1e-14));
    }
  }

  TEST_CASE("constant statistic gives a zero-width interval") {
    BootstrapPlan plan;
    plan.replicates = 50;
    const auto ci = percentile_ci([](const ObservedDataset&) { return 3.0; }, sample_data(), plan);
    CHECK(ci.lower == 3.0);
    CHECK(ci.upper == 3.0);
    CHECK(ci.standard_error == 0.0);
    CHECK(ci.failures == 0);
  }

  TEST_CASE("worker count does not change the interval") {
    const auto ds = sample_data();
    BootstrapPlan plan;
    plan.replicates = 200;
    plan.seed = 99;
    plan.workers = 1;
    const auto a = percentile_ci(mean_y, ds, plan);
    plan.workers = 4;
    const auto b = percentile_ci(mean_y, ds, plan);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
    CHECK(a.standard_error == b.standard_error);
    plan.seed = 100;
    const auto c = percentile_ci(mean_y, ds, plan);
    CHECK(c.lower != a.lower);
  }

  TEST_CASE("stratified resampling preserves stratum counts") {
    const auto ds = sample_data();
    BootstrapPlan plan;
    plan.strata = Stratifier::by_cutpoints(ds.schema(), "x", {0.5, 1.5});
    std::map<std::size_t, std::size_t> base;
    for (std::size_t i = 0; i < ds.size(); ++i) ++base[plan.strata->level_of(ds.x(i))];
    for (std::size_t r = 0; r < 5; ++r) {
      const auto rows = resample_rows(ds, plan, r);
      CHECK(rows.size() == ds.size());
      std::map<std::size_t, std::size_t> got;
      for (auto i : rows) ++got[plan.strata->level_of(ds.x(i))];
      CHECK(got == base);
    }
    CHECK(resample_rows(ds, plan, 3) == resample_rows(ds, plan, 3));
  }

  TEST_CASE("replicate failures") {
    const auto ds = sample_data();
    BootstrapPlan plan;
    plan.replicates = 100;
    std::size_t calls = 0;
    std::mutex m;
    // Fails on roughly half of the replicates.
    auto flaky = [&](const ObservedDataset& d) -> double {
      std::lock_guard lock(m);
      ++calls;
      if (d.y(0) > mean_y(ds)) throw Error(ErrorKind::weak_instrument, "test", "flaky");
      return 1.0;
    };
    try {
      (void)percentile_ci(flaky, ds, plan);
      FAIL("expected unstable bootstrap");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::unstable_bootstrap);
    }
    CHECK(calls == 100);

    plan.max_failure_fraction = 0.99;
    const auto ci = percentile_ci(flaky, ds, plan);
    CHECK(ci.failures > 0);
    CHECK(ci.failures < 100);
    CHECK(ci.replicates == 100);

    auto fatal = [](const ObservedDataset&) -> double {
      throw Error(ErrorKind::io, "test", "disk gone");
    };
    CHECK_THROWS_AS(percentile_ci(fatal, ds, plan), Error);
  }

  TEST_CASE("multi-statistic table marks per-statistic failures") {
    const auto ds = sample_data();
    BootstrapPlan plan;
    plan.replicates = 20;
    const auto table = run_replicates(
        ds, 2,
        [](const ObservedDataset& d) {
          return std::vector<double>{mean_y(d), std::numeric_limits<double>::quiet_NaN()};
        },
        plan);
    CHECK(table.failures(0) == 0);
    CHECK(table.failures(1) == 20);
    CHECK(table.successful(0).size() == 20);
    CHECK_THROWS_AS(percentile_interval(table, 1, plan), Error);
  }

  TEST_CASE("Bonferroni interval with equal statistics is a percentile interval") {
    const auto ds = sample_data();
    BootstrapPlan plan;
    plan.replicates = 100;
    const auto a = percentile_ci(mean_y, ds, plan);
    const auto b = bonferroni_bounds_ci(mean_y, mean_y, ds, plan);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
  }

  TEST_CASE("plan validation") {
    BootstrapPlan plan;
    plan.level = 1.5;
    CHECK_THROWS_AS(plan.validate(), Error);
    plan.level = 0.9;
    plan.replicates = 0;
    CHECK_THROWS_AS(plan.validate(), Error);
  }
}
