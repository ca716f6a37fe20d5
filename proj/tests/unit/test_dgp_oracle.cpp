#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <json.hpp>

#include "oracle.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/dgp_io.hpp"
#include "sivwate/error.hpp"

using namespace sivwate;

namespace {

const auto kId = OutcomeTransform::identity();

DgpTables two_stratum_tables() {
  DgpTables t;
  t.schema = CovariateSchema({Covariate::continuous("x")});
  t.x_support = {{0.0}};
  t.u_support = {"a", "b"};
  t.p_xu = Matrix(1, 2);
  t.p_xu.data = {0.6, 0.4};
  t.e_z = {0.5};
  t.p_d = {Matrix(1, 2), Matrix(1, 2)};
  t.p_d[0].data = {0.2, 0.3};
  t.p_d[1].data = {0.8, 0.2};
  t.y_support = {0.0, 1.0, 3.0};
  t.law_y[0] = {{{0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}}};
  t.law_y[1] = {{{0.1, 0.4, 0.5}, {0.6, 0.2, 0.2}}};
  return t;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

double median_y(const DgpTables& t) {
  auto ys = t.y_support;
  std::sort(ys.begin(), ys.end());
  return ys[(ys.size() - 1) / 2];
}

}  // namespace

TEST_SUITE("dgp_oracle") {
  TEST_CASE("malformed tables name the offending entry") {
    auto t = two_stratum_tables();
    t.p_d[1](0, 1) = 1.2;
    CHECK(message_of([&] { LatentDgp{t}; }).find("p_d.z1[0][1]") != std::string::npos);

    t = two_stratum_tables();
    t.p_xu.data = {0.6, 0.5};
    CHECK(message_of([&] { LatentDgp{t}; }).find("p_xu") != std::string::npos);

    t = two_stratum_tables();
    t.law_y[1][0][1] = {0.6, 0.2, 0.3};
    CHECK(message_of([&] { LatentDgp{t}; }).find("law_y.d1[0][1]") != std::string::npos);

    t = two_stratum_tables();
    t.y_support = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(LatentDgp{t}, Error);
  }

  TEST_CASE("assumption report lists the violating stratum") {
    const LatentDgp dgp(two_stratum_tables());
    const auto r = validate_dgp(dgp);
    CHECK_FALSE(r.iva4);
    CHECK(r.iva2);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0] == std::pair<std::size_t, std::size_t>{0, 1});
  }

  TEST_CASE("assumption report matches re-enumeration on random DGPs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto dgp = random_dgp({3, 3, 2}, seed, false);
      const auto atoms = oracle::enumerate(dgp.tables());
      bool monotone = true;
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t u = 0; u < 3; ++u)
          if (oracle::weight(atoms, x, u) < 0) monotone = false;
      CHECK(validate_dgp(dgp).iva4 == monotone);
    }
  }

  TEST_CASE("population truth against brute-force enumeration") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      RandomDgpOptions o;
      o.sizes = {3, 3, 3};
      o.seed = seed;
      o.monotonicity = seed % 2 == 0 ? Monotonicity::enforce : Monotonicity::any;
      const auto dgp = random_dgp(o);
      const auto& t = dgp.tables();
      const auto truth = population_truth(dgp);
      CHECK(truth.sivwate == doctest::Approx(oracle::sivwate(t)).epsilon(1e-12));
      CHECK(std::abs(truth.lambda - oracle::lambda(t)) < 1e-12);
      if (validate_dgp(dgp).iva4) {
        CHECK(truth.lambda == 0.0);
        CHECK(std::abs(truth.naive_estimand - truth.sivwate) < 1e-12);
        CHECK_FALSE(truth.nsivwate.has_value());
      }
      const std::function<double(double)> g_id = [](double y) { return y; };
      const double c = median_y(t);
      const std::function<double(double)> g_ind = [c](double y) { return y > c ? 1.0 : 0.0; };
      const std::pair<oracle::Arm, Arm> arms[] = {{oracle::Arm::treated, Arm::treated},
                                                  {oracle::Arm::untreated, Arm::untreated},
                                                  {oracle::Arm::difference, Arm::difference}};
      for (const auto& [oa, la] : arms) {
        CHECK(population_rhs_prop1(dgp, kId, la) ==
              doctest::Approx(oracle::regression_form(t, g_id, oa)).epsilon(1e-10));
        CHECK(population_rhs_prop2(dgp, OutcomeTransform::indicator(c), la) ==
              doctest::Approx(oracle::weighting_form(t, g_ind, oa)).epsilon(1e-10));
      }
      const double eq_treated_indicator = oracle::weighted_mean(
          t, [c](double, double y1, std::size_t) { return y1 > c ? 1.0 : 0.0; });
      CHECK(std::abs(weighted_potential_mean(dgp, OutcomeTransform::indicator(c), Arm::treated) -
                     eq_treated_indicator) < 1e-10);
      CHECK(std::abs(population_rhs_prop1(dgp, OutcomeTransform::indicator(c), Arm::treated) -
                     eq_treated_indicator) < 1e-10);
    }
  }

  TEST_CASE("IV strength equals the averaged observable treatment-rate gap") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto dgp = random_dgp({4, 2, 2}, seed, true);
      const ObservableLaw law(dgp);
      double gap = 0;
      for (std::size_t x = 0; x < law.x_count(); ++x)
        gap += law.p_x(x) * (law.treatment_rate(1, x) - law.treatment_rate(0, x));
      CHECK(std::abs(population_truth(dgp).iv_strength - gap) < 1e-12);
    }
  }

  TEST_CASE("constant effect gives SIVWATE equal to that constant") {
    auto t = random_dgp({3, 2, 2}, 5, true).tables();
    t.y_support = {0.0, 2.0};
    for (auto& bx : t.law_y[0])
      for (auto& l : bx) l = {1.0, 0.0};
    for (auto& bx : t.law_y[1])
      for (auto& l : bx) l = {0.0, 1.0};
    const LatentDgp dgp(t);
    CHECK(population_truth(dgp).sivwate == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("half propensity gives kappa of plus or minus two") {
    auto t = random_dgp({2, 2, 2}, 9, true).tables();
    t.e_z = {0.5, 0.5};
    const double e = 0.5;
    CHECK((1 - e) / (e * (1 - e)) == 2.0);
    CHECK((0 - e) / (e * (1 - e)) == -2.0);
    const LatentDgp dgp(t);
    CHECK(std::abs(population_rhs_prop2(dgp, kId, Arm::difference) -
                   population_rhs_prop1(dgp, kId, Arm::difference)) < 1e-12);
  }

  TEST_CASE("degenerate instrument laws raise errors") {
    auto t = random_dgp({2, 2, 2}, 3, true).tables();
    t.e_z[1] = 1.0;
    CHECK_THROWS_WITH_AS(population_rhs_prop2(LatentDgp(t), kId, Arm::difference),
                         doctest::Contains("propensity"), Error);

    t = random_dgp({2, 2, 2}, 3, true).tables();
    t.p_d[1] = t.p_d[0];
    try {
      population_truth(LatentDgp(t));
      FAIL("expected weak instrument");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::weak_instrument);
      CHECK(e.value().has_value());
    }

    auto v = two_stratum_tables();
    v.p_d[0].data = {0.5, 0.5};
    v.p_d[1].data = {0.4, 0.4};
    CHECK_THROWS_AS(population_truth(LatentDgp(v)), Error);
  }

  TEST_CASE("deterministic compliance without defiers: SIVWATE is the complier LATE") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto dgp = random_dcc_dgp(seed, 3, 3, false);
      CHECK(validate_dgp(dgp).iva4);
      CHECK(std::abs(population_truth(dgp).sivwate - oracle::complier_late(dgp.tables())) < 1e-12);
      CHECK(std::abs(population_rhs_prop2(dgp, kId, Arm::difference) -
                     oracle::complier_late(dgp.tables())) < 1e-12);
    }
  }

  TEST_CASE("negative class share is rejected") {
    DccSpec s;
    s.schema = CovariateSchema({Covariate::continuous("x")});
    s.x_support = {{0.0}};
    s.p_x = {1.0};
    s.e_z = {0.5};
    s.class_mix = {{0.5, 0.5, 0.2, -0.2}};
    s.y_support = {0.0, 1.0};
    std::array<std::vector<double>, 4> laws{std::vector<double>{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5},
                                            {0.5, 0.5}};
    s.law_y[0] = {laws};
    s.law_y[1] = {laws};
    CHECK_THROWS_WITH_AS(make_dcc_dgp(s), doctest::Contains("negative"), Error);
  }

  TEST_CASE("pooled and class-resolved representations of the same population") {
    // Mix (never, always, complier, defier) = (.3, .3, .3, .1), outcome laws
    // identical across classes. Class-resolved: defiers carry weight -1 and
    // lambda = .1 / .2. Pooled into one stratum per x: w = .3 - .1 >= 0.
    DccSpec s;
    s.schema = CovariateSchema({Covariate::continuous("x")});
    s.x_support = {{0.0}, {1.0}};
    s.p_x = {0.5, 0.5};
    s.e_z = {0.4, 0.6};
    s.class_mix = {{0.3, 0.3, 0.3, 0.1}, {0.3, 0.3, 0.3, 0.1}};
    s.y_support = {0.0, 1.0, 2.0};
    for (std::size_t x = 0; x < 2; ++x) {
      std::array<std::vector<double>, 4> l0, l1;
      for (auto& l : l0) l = {0.5, 0.3, 0.2};
      for (auto& l : l1) l = x == 0 ? std::vector<double>{0.2, 0.3, 0.5} : std::vector<double>{0.1, 0.6, 0.3};
      s.law_y[0].push_back(l0);
      s.law_y[1].push_back(l1);
    }
    const auto resolved = make_dcc_dgp(s);
    const auto pooled = collapse_confounder(resolved);
    CHECK(pooled.u_count() == 1);
    CHECK(validate_dgp(pooled).iva4);
    CHECK_FALSE(validate_dgp(resolved).iva4);
    CHECK(population_truth(pooled).lambda == 0.0);
    CHECK(population_truth(resolved).lambda == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(population_truth(pooled).naive_estimand -
                   population_truth(resolved).naive_estimand) < 1e-12);
    CHECK(std::abs(population_truth(pooled).sivwate - population_truth(resolved).sivwate) < 1e-12);
    // Table 1 analog: defiers exist but compliers dominate inside the stratum.
    CHECK(pooled.weight(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("collapsing requires u-invariant outcome laws") {
    CHECK_THROWS_AS(collapse_confounder(random_dgp({2, 3, 3}, 1, true)), Error);
  }

  TEST_CASE("bound-attaining construction reaches each endpoint") {
    BoundAttainingSpec s;
    s.schema = CovariateSchema({Covariate::continuous("x")});
    s.x_support = {{0.0}};
    s.p_x = {1.0};
    s.sivwate_x = {1.5};
    s.compliance_share_x = {0.4};
    s.r = 5;
    s.side = BoundSide::lower;
    auto dgp = make_bound_attaining_dgp(s);
    CHECK(oracle::conditional_ate(dgp.tables(), 0) == doctest::Approx(1.5 - 3.0).epsilon(1e-12));
    CHECK(population_truth(dgp).sivwate == doctest::Approx(1.5).epsilon(1e-12));
    s.side = BoundSide::upper;
    dgp = make_bound_attaining_dgp(s);
    CHECK(oracle::conditional_ate(dgp.tables(), 0) == doctest::Approx(1.5 + 3.0).epsilon(1e-12));
    s.r = 0;
    dgp = make_bound_attaining_dgp(s);
    CHECK(std::abs(global_ate(dgp) - population_truth(dgp).sivwate) < 1e-12);
    s.compliance_share_x = {0.0};
    CHECK_THROWS_AS(make_bound_attaining_dgp(s), Error);
  }

  TEST_CASE("random DGPs are deterministic and honour monotonicity") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto a = random_dgp({4, 4, 3}, seed, true);
      CHECK(validate_dgp(a).iva4);
      CHECK(population_truth(a).iv_strength >= 0.05);
      CHECK(a.tables().p_xu == random_dgp({4, 4, 3}, seed, true).tables().p_xu);
    }
    RandomDgpOptions o;
    o.min_iv_strength = 2.0;
    o.max_attempts = 5;
    try {
      random_dgp(o);
      FAIL("expected a generation error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::generation);
    }
  }

  TEST_CASE("no sign reversal with positive stratum effects") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      RandomDgpOptions o;
      o.sizes = {3, 3, 3};
      o.seed = seed;
      o.positive_effects = true;
      CHECK(population_truth(random_dgp(o)).naive_estimand > 0);
    }
  }

  TEST_CASE("sampling") {
    const auto dgp = random_dgp({3, 2, 3}, 2, true);
    CHECK_THROWS_AS(sample_dataset(dgp, 0, 1), Error);
    CHECK(sample_dataset(dgp, 1000, 5) == sample_dataset(dgp, 1000, 5));
    CHECK_FALSE(sample_dataset(dgp, 1000, 5) == sample_dataset(dgp, 1000, 6));

    const std::size_t n = 1000000;
    const auto ds = sample_dataset(dgp, n, 77);
    double n1 = 0, d1 = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.z(i) == 1) {
        n1 += 1;
        d1 += ds.d(i);
      }
    // Enumerated P(D = 1 | Z = 1) from the joint.
    double pz1 = 0, pd1z1 = 0;
    for (const auto& a : oracle::enumerate(dgp.tables()))
      if (a.z == 1) {
        pz1 += a.p;
        if (a.d == 1) pd1z1 += a.p;
      }
    const double p = pd1z1 / pz1;
    const double se = std::sqrt(p * (1 - p) / n1);
    CHECK(std::abs(d1 / n1 - p) < 4 * se);
  }

  TEST_CASE("expanded population reproduces the observable law") {
    DgpTables t = two_stratum_tables();
    t.p_d[1].data = {0.8, 0.4};
    const LatentDgp dgp(t);
    const ObservableLaw law(dgp);
    const std::size_t n = 10000;
    const auto ds = expand_population(dgp, n);
    CHECK(ds.size() == n);
    double count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (ds.z(i) == 1 && ds.d(i) == 1 && ds.y(i) == 3.0) count += 1;
    CHECK(count / n == doctest::Approx(law.joint(0, 1, 1, 2)).epsilon(1e-12));
    CHECK_THROWS_AS(expand_population(dgp, 7), Error);
  }

  TEST_CASE("spec files round-trip and report field paths") {
    const auto dgp = random_dgp({3, 2, 3}, 4, true);
    const auto again = parse_dgp_spec(dgp_spec_to_json(dgp));
    CHECK(again.tables().p_xu == dgp.tables().p_xu);
    CHECK(again.tables().law_y == dgp.tables().law_y);
    CHECK(again.tables().y_support == dgp.tables().y_support);

    CHECK_THROWS_WITH_AS(parse_dgp_spec(R"({"type": "latent", "covariates": []})"),
                         doctest::Contains("x_support"), Error);
    CHECK_THROWS_AS(parse_dgp_spec("{not json"), Error);
    try {
      load_dgp_spec(std::string(SIVWATE_TEST_DATA_DIR) + "/corrupted.json");
      FAIL("corrupted spec accepted");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("p_xu") != std::string::npos);
    }
    for (const char* name : {"monotone.json", "violating.json", "dcc.json"})
      CHECK_NOTHROW(load_dgp_spec(std::string(SIVWATE_SPECS_DIR) + "/" + name));
  }

  TEST_CASE("truth sidecar carries the enumerated truth") {
    const auto dgp = load_dgp_spec(std::string(SIVWATE_SPECS_DIR) + "/violating.json");
    const auto j = nlohmann::json::parse(truth_sidecar_json(dgp));
    const auto truth = population_truth(dgp);
    CHECK(j["population_truth"]["sivwate"].get<double>() == truth.sivwate);
    CHECK(j["population_truth"]["lambda"].get<double>() == truth.lambda);
    CHECK(j["assumptions"]["iva4"].get<bool>() == false);
    CHECK(j["global_ate"].get<double>() == doctest::Approx(oracle::global_ate(dgp.tables())));
  }
}
