#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"
#include "sivwate/sensitivity.hpp"

using namespace sivwate;

TEST_SUITE("sensitivity") {
  TEST_CASE("lambda values") {
    CHECK(lambda_value(0.05, 0.40) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(lambda_value(0.0, 0.3) == 0.0);
    try {
      (void)lambda_value(0.05, 0.0);
      FAIL("expected weak instrument");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::weak_instrument);
    }
    CHECK_THROWS_AS(lambda_value(-0.1, 0.4), Error);
  }

  TEST_CASE("interval from the worked inputs") {
    const auto r = psivwate_interval({-6.0, 0.05, 0.40, 24.2});
    CHECK(r.lambda == doctest::Approx(0.125));
    CHECK(r.lower == doctest::Approx(-9.025).epsilon(1e-12));
    CHECK(r.upper == doctest::Approx(-2.975).epsilon(1e-12));
    CHECK(std::round(r.lower) == -9.0);
    CHECK(std::round(r.upper) == -3.0);
  }

  TEST_CASE("zero gap bound is degenerate") {
    const auto r = psivwate_interval({1.5, 0.05, 0.40, 0.0});
    CHECK(r.lower == 1.5);
    CHECK(r.upper == 1.5);
  }

  TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(psivwate_interval({1, 0.05, 0.4, -1}), Error);
    CHECK_THROWS_AS(psivwate_interval({1, -0.05, 0.4, 1}), Error);
    CHECK_THROWS_AS(psivwate_interval({1, 0.05, -0.4, 1}), Error);
    CHECK_THROWS_AS(psivwate_interval({std::nan(""), 0.05, 0.4, 1}), Error);
  }

  TEST_CASE("monotone process has zero residual and zero lambda") {
    const auto c = population_bias_check(random_dgp({3, 3, 3}, 2, true));
    CHECK(c.lambda == 0.0);
    CHECK(std::abs(c.residual) < 1e-14);
    CHECK_FALSE(c.nsivwate.has_value());
  }

  TEST_CASE("hand-built two-stratum violating process") {
    DgpTables t;
    t.schema = CovariateSchema({Covariate::continuous("x")});
    t.x_support = {{0.0}};
    t.u_support = {"pos", "neg"};
    t.p_xu = Matrix(1, 2);
    t.p_xu.data = {0.7, 0.3};
    t.e_z = {0.5};
    t.p_d = {Matrix(1, 2), Matrix(1, 2)};
    t.p_d[0].data = {0.2, 0.6};
    t.p_d[1].data = {0.9, 0.4};
    t.y_support = {0.0, 1.0};
    t.law_y[0] = {{{0.8, 0.2}, {0.5, 0.5}}};
    t.law_y[1] = {{{0.3, 0.7}, {0.9, 0.1}}};
    const LatentDgp dgp(t);
    const auto c = population_bias_check(dgp);
    // w = (0.7, -0.2): lambda = 0.3 * 0.2 / (0.7 * 0.7 - 0.3 * 0.2)
    CHECK(c.lambda == doctest::Approx(0.06 / 0.43).epsilon(1e-12));
    CHECK(c.psivwate == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(c.nsivwate);
    CHECK(*c.nsivwate == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(std::abs(c.residual) < 1e-12);
  }

  TEST_CASE("random violating processes") {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RandomDgpOptions o;
      o.sizes = {3, 3, 3};
      o.seed = seed;
      o.monotonicity = Monotonicity::violate;
      const auto dgp = random_dgp(o);
      const auto c = population_bias_check(dgp);
      worst = std::max(worst, std::abs(c.residual));
      CHECK(std::abs(c.lambda - oracle::lambda(dgp.tables())) < 1e-12);
      CHECK(c.lambda > 0);
    }
    CHECK(worst <= 1e-10);
  }
}
