#include "doctest.h"

#include "qmig/data_table.hpp"
#include "qmig/design.hpp"
#include "qmig/estimators.hpp"
#include "qmig/rng.hpp"
#include "qmig/stats.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

using namespace qmig;

namespace {

// Test-side log likelihood written from the model definition, used as an
// independent check of the optimizer's stationary point.
double loglik_at(const DesignMatrix& d, const Eigen::VectorXd& beta, ModelKind link) {
    Eigen::VectorXd eta = d.X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double p = link == ModelKind::Probit ? stats::norm_cdf(eta(i))
                                             : stats::logistic_cdf(eta(i));
        ll += d.w(i) * (d.y(i) > 0.5 ? std::log(p) : std::log1p(-p));
    }
    return ll;
}

DesignMatrix simulated_binary(std::uint64_t seed, std::size_t n, ModelKind link,
                              DataTable* table_out = nullptr) {
    Rng rng = make_rng(seed, 0x03ULL);
    std::vector<double> x1(n), x2(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = next_normal(rng);
        x2[i] = next_unit(rng) < 0.4 ? 1.0 : 0.0;
        double eta = -0.3 + 0.9 * x1[i] - 0.6 * x2[i];
        double p = link == ModelKind::Probit ? stats::norm_cdf(eta) : stats::logistic_cdf(eta);
        y[i] = next_unit(rng) < p ? 1.0 : 0.0;
    }
    DataTable t;
    t.add_column("y", y);
    t.add_column("x1", x1);
    t.add_column("x2", x2);
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x1"), Term::continuous("x2")};
    if (table_out) *table_out = t;
    return build_design(t, spec);
}

} // namespace

TEST_CASE("logit matches the 2x2 closed form") {
    // Counts: (x=0,y=0)=35, (x=0,y=1)=15, (x=1,y=0)=20, (x=1,y=1)=30.
    std::vector<double> x, y;
    auto add = [&](double xv, double yv, int count) {
        for (int i = 0; i < count; ++i) {
            x.push_back(xv);
            y.push_back(yv);
        }
    };
    add(0, 0, 35);
    add(0, 1, 15);
    add(1, 0, 20);
    add(1, 1, 30);
    DataTable t;
    t.add_column("y", y);
    t.add_column("x", x);
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    ModelFit fit = binary_mle_fit(build_design(t, spec), ModelKind::Logit, false);

    double slope = std::log((30.0 / 20.0) / (15.0 / 35.0)); // log odds ratio
    double intercept = std::log(15.0 / 35.0);
    CHECK(fit.coef_of("x") == doctest::Approx(slope).epsilon(1e-6));
    CHECK(fit.coef_of("const") == doctest::Approx(intercept).epsilon(1e-6));
    // Classical se of the log odds ratio: sqrt of the summed reciprocal counts.
    double se = std::sqrt(1.0 / 30 + 1.0 / 20 + 1.0 / 15 + 1.0 / 35);
    CHECK(fit.se_of("x") == doctest::Approx(se).epsilon(1e-6));
    CHECK(fit.converged);
}

TEST_CASE("optimum is a stationary point of the test-side likelihood") {
    for (ModelKind link : {ModelKind::Probit, ModelKind::Logit}) {
        DesignMatrix d = simulated_binary(11, 600, link);
        ModelFit fit = binary_mle_fit(d, link);
        REQUIRE(fit.converged);
        CHECK(fit.loglik == doctest::Approx(loglik_at(d, fit.coef, link)).epsilon(1e-10));

        // Central finite differences of the independent likelihood must
        // vanish at the reported optimum, relative to the curvature scale.
        for (Eigen::Index j = 0; j < fit.coef.size(); ++j) {
            double h = 1e-6 * (std::fabs(fit.coef(j)) + 1.0);
            Eigen::VectorXd up = fit.coef, dn = fit.coef;
            up(j) += h;
            dn(j) -= h;
            double grad = (loglik_at(d, up, link) - loglik_at(d, dn, link)) / (2.0 * h);
            CHECK(std::fabs(grad) / (std::fabs(fit.loglik) + 1.0) < 1e-6);
        }
    }
}

TEST_CASE("simulated coefficients are recovered") {
    for (ModelKind link : {ModelKind::Probit, ModelKind::Logit}) {
        DesignMatrix d = simulated_binary(12, 6000, link);
        ModelFit fit = binary_mle_fit(d, link);
        CHECK(fit.coef_of("const") == doctest::Approx(-0.3).epsilon(0.35));
        CHECK(fit.coef_of("x1") == doctest::Approx(0.9).epsilon(0.2));
        CHECK(fit.coef_of("x2") == doctest::Approx(-0.6).epsilon(0.35));
        CHECK(fit.pseudo_r_squared > 0.05);
        CHECK(fit.pseudo_r_squared < 0.9);
    }
}

TEST_CASE("mcfadden pseudo r squared against the intercept-only likelihood") {
    DesignMatrix d = simulated_binary(13, 500, ModelKind::Logit);
    ModelFit fit = binary_mle_fit(d, ModelKind::Logit);
    double ybar = d.y.mean();
    double ll0 = static_cast<double>(d.n_rows()) *
                 (ybar * std::log(ybar) + (1.0 - ybar) * std::log1p(-ybar));
    CHECK(fit.pseudo_r_squared == doctest::Approx(1.0 - fit.loglik / ll0).epsilon(1e-12));
}

TEST_CASE("logit sandwich covariance matches the oracle") {
    DesignMatrix d = simulated_binary(14, 800, ModelKind::Logit);
    ModelFit fit = binary_mle_fit(d, ModelKind::Logit, true);

    Eigen::VectorXd eta = d.X * fit.coef;
    Eigen::ArrayXd p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p(i) = stats::logistic_cdf(eta(i));
    Eigen::ArrayXd h = p * (1.0 - p);
    Eigen::MatrixXd info = d.X.transpose() * (h.matrix().asDiagonal() * d.X);
    Eigen::ArrayXd score = d.y.array() - p;
    Eigen::MatrixXd meat = d.X.transpose() * (score.square().matrix().asDiagonal() * d.X);
    Eigen::MatrixXd sandwich = info.inverse() * meat * info.inverse();
    for (Eigen::Index a = 0; a < 3; ++a) {
        for (Eigen::Index b = 0; b < 3; ++b) {
            CHECK(fit.cov(a, b) == doctest::Approx(sandwich(a, b)).epsilon(1e-6));
        }
    }
}

TEST_CASE("frequency weights equal row duplication") {
    DataTable t;
    t.add_column("y", {0.0, 1.0, 1.0, 0.0, 1.0});
    t.add_column("x", {0.0, 0.0, 1.0, 1.0, 2.0});
    t.add_column("w", {3.0, 1.0, 2.0, 2.0, 1.0});
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    spec.weight = "w";
    ModelFit wfit = binary_mle_fit(build_design(t, spec), ModelKind::Logit, false);

    DataTable dup;
    dup.add_column("y", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0});
    dup.add_column("x", {0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0});
    DesignSpec uspec;
    uspec.response = "y";
    uspec.terms = {Term::continuous("x")};
    ModelFit ufit = binary_mle_fit(build_design(dup, uspec), ModelKind::Logit, false);
    CHECK(wfit.coef_of("x") == doctest::Approx(ufit.coef_of("x")).epsilon(1e-8));
    CHECK(wfit.coef_of("const") == doctest::Approx(ufit.coef_of("const")).epsilon(1e-8));
    CHECK(wfit.loglik == doctest::Approx(ufit.loglik).epsilon(1e-10));
}

TEST_CASE("separation raises a typed error") {
    // x separates y perfectly with a wide spread, so the runaway-coefficient
    // guard trips before the score can flatten out.
    std::vector<double> x, y;
    for (double v : {0.5, 1.0, 2.0, 3.0, 4.0, 5.0}) {
        for (int rep = 0; rep < 4; ++rep) {
            x.push_back(v);
            y.push_back(1.0);
            x.push_back(-v);
            y.push_back(0.0);
        }
    }
    DataTable t;
    t.add_column("y", y);
    t.add_column("x", x);
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    DesignMatrix d = build_design(t, spec);
    CHECK_THROWS_AS(binary_mle_fit(d, ModelKind::Logit), SeparationError);
    CHECK_THROWS_AS(binary_mle_fit(d, ModelKind::Probit), SeparationError);
}

TEST_CASE("input validation") {
    DataTable t;
    t.add_column("y", {0.0, 2.0, 1.0, 0.0});
    t.add_column("x", {0.0, 1.0, 2.0, 3.0});
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    // Response must be 0/1.
    CHECK_THROWS_AS(binary_mle_fit(build_design(t, spec), ModelKind::Logit),
                    std::invalid_argument);
    // Constant response has no variation to fit.
    DataTable c;
    c.add_column("y", {1.0, 1.0, 1.0, 1.0});
    c.add_column("x", {0.0, 1.0, 2.0, 3.0});
    CHECK_THROWS_AS(binary_mle_fit(build_design(c, spec), ModelKind::Logit),
                    std::invalid_argument);
    // OLS is not a valid link here.
    DataTable ok;
    ok.add_column("y", {0.0, 1.0, 1.0, 0.0});
    ok.add_column("x", {0.0, 1.0, 2.0, 3.0});
    CHECK_THROWS_AS(binary_mle_fit(build_design(ok, spec), ModelKind::Ols),
                    std::invalid_argument);
}

TEST_CASE("predict_response applies the link") {
    DataTable table;
    DesignMatrix d = simulated_binary(15, 200, ModelKind::Probit, &table);
    ModelFit fit = binary_mle_fit(d, ModelKind::Probit);
    Eigen::VectorXd p = predict_response(fit, d);
    Eigen::VectorXd eta = d.X * fit.coef;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        CHECK(p(i) == doctest::Approx(stats::norm_cdf(eta(i))).epsilon(1e-12));
        CHECK(p(i) >= 0.0);
        CHECK(p(i) <= 1.0);
    }
}
