#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracle.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"
#include "sivwate/nuisance.hpp"
#include "sivwate/regression.hpp"
#include "sivwate/rng.hpp"

using namespace sivwate;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

TEST_SUITE("nuisance") {
  TEST_CASE("intercept-only logistic fit returns the sample share") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
    Eigen::VectorXd y(4);
    y << 1, 1, 0, 0;
    const auto fit = fit_binary_regression(X, y, Family::logistic, {});
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[0]) < 1e-12);
  }

  TEST_CASE("linear fit recovers an exact line") {
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) {
      X(i, 0) = 1;
      X(i, 1) = i;
      y[i] = 2.0 * i;
    }
    const auto fit = fit_binary_regression(X, y, Family::linear, {});
    CHECK(fit.coefficients[0] == doctest::Approx(0).epsilon(1e-12));
    CHECK(fit.coefficients[1] == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("logistic fit recovers simulated coefficients") {
    const std::size_t n = 20000;
    auto gen = make_engine(42);
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = uniform(gen, -2, 2);
      X(i, 0) = 1;
      X(i, 1) = x;
      const double p = 1 / (1 + std::exp(-(-0.5 + 1.0 * x)));
      y[i] = uniform01(gen) < p ? 1 : 0;
    }
    const auto fit = fit_binary_regression(X, y, Family::logistic, {});
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.coefficients[0] + 0.5) < 3 * fit.standard_errors[0]);
    CHECK(std::abs(fit.coefficients[1] - 1.0) < 3 * fit.standard_errors[1]);
    for (std::size_t k = 1; k < fit.trace.size(); ++k) CHECK(fit.trace[k] >= fit.trace[k - 1]);
  }

  TEST_CASE("perfect separation is flagged and stabilized") {
    Eigen::MatrixXd X(6, 2);
    Eigen::VectorXd y(6);
    for (int i = 0; i < 6; ++i) {
      X(i, 0) = 1;
      X(i, 1) = i;
      y[i] = i >= 3 ? 1 : 0;
    }
    const auto fit = fit_binary_regression(X, y, Family::logistic, {});
    CHECK(fit.separation);
    CHECK(fit.coefficients.allFinite());
    CHECK(fit.ridge > 0);
  }

  TEST_CASE("family resolution") {
    const std::vector<double> binary{0, 1, 1}, real{0, 0.5};
    CHECK(resolve_family(Family::automatic, binary) == Family::logistic);
    CHECK(resolve_family(Family::automatic, real) == Family::linear);
    CHECK(resolve_family(Family::linear, binary) == Family::linear);
  }

  TEST_CASE("formula parsing") {
    const auto t = parse_formula("age + site + age:site");
    REQUIRE(t.size() == 3);
    CHECK(t[2] == std::vector<std::string>{"age", "site"});
    CHECK_THROWS_AS(parse_formula("age + "), Error);
    CHECK_THROWS_AS(parse_formula("age::site"), Error);
  }

  TEST_CASE("design columns") {
    const CovariateSchema s({Covariate::continuous("age"), Covariate::categorical("site", {"a", "b", "c"})});
    RegressionSpec spec;
    spec.design = DesignKind::main_effects;
    const Design main(s, spec);
    CHECK(main.columns() == 4);
    spec.design = DesignKind::formula;
    spec.terms = parse_formula("age:site");
    CHECK(Design(s, spec).columns() == 3);
    spec.design = DesignKind::intercept_only;
    CHECK(Design(s, spec).columns() == 1);
  }

  TEST_CASE("cell means and empty cells") {
    const CovariateSchema s({Covariate::continuous("x")});
    ObservedDataset ds(s, {1, 3, 5, 10}, {0, 1, 0, 1}, {0, 1, 0, 1}, {0, 0, 1, 1});
    const std::vector<double> y{1, 3, 5, 10};
    const auto cm = fit_cell_means(ds, y, all_rows(4));
    const std::vector<double> x0{0.0}, x1{1.0}, x2{2.0};
    CHECK(cm.predict(x0) == 2.0);
    CHECK(cm.predict(x1) == 7.5);
    try {
      (void)cm.predict(x2);
      FAIL("expected empty cell");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::empty_cell);
    }
    const std::vector<std::size_t> only_first{0, 1};
    const auto partial = fit_cell_means(ds, y, only_first);
    CHECK(partial.diagnostics().empty_cells == 1);
    CHECK_THROWS_AS((void)partial.predict(x1), Error);
  }

  TEST_CASE("saturated nuisance on an expanded population equals the enumerated law") {
    // Every P(x, z, d, y) is a multiple of 1/1000.
    DgpTables t;
    t.schema = CovariateSchema({Covariate::continuous("x")});
    t.x_support = {{0.0}, {1.0}};
    t.u_support = {"u"};
    t.p_xu = Matrix(2, 1);
    t.p_xu.data = {0.5, 0.5};
    t.e_z = {0.4, 0.6};
    t.p_d = {Matrix(2, 1), Matrix(2, 1)};
    t.p_d[0].data = {0.25, 0.5};
    t.p_d[1].data = {0.75, 0.75};
    t.y_support = {0.0, 1.0};
    t.law_y[0] = {{{0.5, 0.5}}, {{0.75, 0.25}}};
    t.law_y[1] = {{{0.25, 0.75}}, {{0.5, 0.5}}};
    const LatentDgp dgp(t);
    const ObservableLaw law(dgp);
    const auto ds = expand_population(dgp, 16000);
    const auto fit = fit_nuisance(ds, NuisanceSpecs::saturated());
    for (std::size_t x = 0; x < 2; ++x) {
      const std::vector<double> xv{static_cast<double>(x)};
      CHECK(fit.propensity(xv) == doctest::Approx(law.e_z(x)).epsilon(1e-12));
      for (int z = 0; z < 2; ++z) {
        CHECK(fit.treatment_rate(z, xv) == doctest::Approx(law.treatment_rate(z, x)).epsilon(1e-12));
        double ey = 0;
        for (int d = 0; d < 2; ++d)
          for (std::size_t k = 0; k < 2; ++k) ey += law.p_dy(z, x, d, k) * law.y_value(k);
        CHECK(fit.outcome_mean(z, xv) == doctest::Approx(ey).epsilon(1e-12));
      }
    }
    CHECK(fit.all_converged());
    CHECK(fit.diagnostics().size() == 5);
  }

  TEST_CASE("intercept-only nuisance gives arm means") {
    const auto ds = sample_dataset(random_dgp({3, 2, 3}, 8, true), 400, 1);
    const auto fit = fit_nuisance(ds, NuisanceSpecs::intercept_only());
    double nz = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) nz += ds.z(i);
    const std::vector<double> x{0.0};
    CHECK(fit.propensity(x) == doctest::Approx(nz / ds.size()).epsilon(1e-10));
  }
}
