#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "sivwate/bounds.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"

using namespace sivwate;

namespace {

UnitEffects single(double effect, double gap) {
  UnitEffects u;
  u.effect = {effect};
  u.gap = {gap};
  u.usable = {1};
  return u;
}

BoundAttainingSpec two_x_spec(BoundSide side, double r) {
  BoundAttainingSpec s;
  s.schema = CovariateSchema({Covariate::continuous("x")});
  s.x_support = {{0.0}, {1.0}};
  s.p_x = {0.5, 0.5};
  s.sivwate_x = {-2.0, 3.0};
  s.compliance_share_x = {0.5, 0.5};
  s.r = r;
  s.side = side;
  return s;
}

}  // namespace

TEST_SUITE("bounds") {
  TEST_CASE("conditional bound examples") {
    auto b = conditional_bounds(-6, 0.4, 10);
    CHECK(b.lower == doctest::Approx(-12));
    CHECK(b.upper == doctest::Approx(0).epsilon(1e-12));
    b = conditional_bounds(2.5, 0.3, 0);
    CHECK(b.lower == 2.5);
    CHECK(b.upper == 2.5);
    b = conditional_bounds(2.5, 1.0, 7);
    CHECK(b.lower == 2.5);
    CHECK(b.upper == 2.5);
    CHECK_THROWS_AS(conditional_bounds(1, 0.5, -1), Error);
    CHECK_THROWS_AS(conditional_bounds(1, 1.5, 1), Error);
  }

  TEST_CASE("multiplier bounds on a single unit") {
    const auto g = global_bounds_multiplier(single(-6, 0.4), 2.0);
    CHECK(g.lower == doctest::Approx(-11.4).epsilon(1e-12));
    CHECK(g.upper == doctest::Approx(-0.6).epsilon(1e-12));
    const auto one = global_bounds_multiplier(single(-6, 0.4), 1.0);
    CHECK(one.lower == -6.0);
    CHECK(one.upper == -6.0);
  }

  TEST_CASE("m = 1 returns the average unit effect") {
    UnitEffects u;
    u.effect = {1, 2, 6, 100};
    u.gap = {0.5, 0.2, 0.9, 0.0};
    u.usable = {1, 1, 1, 0};
    u.excluded = 1;
    const auto g = global_bounds_multiplier(u, 1.0);
    CHECK(g.lower == doctest::Approx(3.0));
    CHECK(g.upper == doctest::Approx(3.0));
    CHECK(g.used == 3);
    CHECK(g.excluded == 1);
  }

  TEST_CASE("grid widths do not shrink as m grows") {
    UnitEffects u;
    u.effect = {-6, 4, -1.5};
    u.gap = {0.4, 0.2, 0.7};
    u.usable = {1, 1, 1};
    const auto rows = bounds_grid(u, {1.1, 1.5, 2, 3, 5});
    REQUIRE(rows.size() == 5);
    for (std::size_t k = 1; k < rows.size(); ++k)
      CHECK(rows[k].upper - rows[k].lower >= rows[k - 1].upper - rows[k - 1].lower);
  }

  TEST_CASE("every unit excluded is a weak instrument") {
    UnitEffects u;
    u.effect = {1};
    u.gap = {0};
    u.usable = {0};
    u.excluded = 1;
    CHECK_THROWS_AS(global_bounds_multiplier(u, 2.0), Error);
  }

  TEST_CASE("configuration checks") {
    BoundsConfig c;
    c.mode = BoundsConfig::Mode::multiplier;
    c.value = 0.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c.mode = BoundsConfig::Mode::absolute_range;
    c.value = -1;
    CHECK_THROWS_AS(c.validate(), Error);
    c.value = 2;
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("attaining process: population endpoint") {
    for (BoundSide side : {BoundSide::lower, BoundSide::upper}) {
      const auto dgp = make_bound_attaining_dgp(two_x_spec(side, 4.0));
      const auto ct = conditional_truth(dgp);
      double lo = 0, hi = 0;
      for (const auto& c : ct) {
        const auto b = conditional_bounds(*c.sivwate, c.compliance_gap, 4.0);
        lo += c.p_x * b.lower;
        hi += c.p_x * b.upper;
      }
      const double ate = oracle::global_ate(dgp.tables());
      CHECK(std::abs((side == BoundSide::lower ? lo : hi) - ate) < 1e-10);
    }
  }

  TEST_CASE("attaining process: data endpoint from the expanded population") {
    for (BoundSide side : {BoundSide::lower, BoundSide::upper}) {
      const auto dgp = make_bound_attaining_dgp(two_x_spec(side, 4.0));
      const auto ds = expand_population(dgp, 1024);
      const auto nuis = fit_nuisance(ds, NuisanceSpecs::saturated());
      const auto units = unit_effects(ds, nuis);
      CHECK(units.excluded == 0);
      const auto g = global_bounds_absolute(units, 4.0);
      CHECK(std::abs((side == BoundSide::lower ? g.lower : g.upper) - global_ate(dgp)) < 1e-10);
    }
  }

  TEST_CASE("containment on random processes") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto dgp = random_dgp({3, 3, 3}, seed, true);
      for (const auto& c : conditional_truth(dgp)) {
        if (!c.sivwate) continue;
        const double r = c.effect_max - c.effect_min;
        const auto b = conditional_bounds(*c.sivwate, c.compliance_gap, r);
        CHECK(c.ate >= b.lower - 1e-10);
        CHECK(c.ate <= b.upper + 1e-10);
      }
    }
  }
}
