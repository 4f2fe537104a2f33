#include "doctest.h"

#include "qmig/stats.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>

using namespace qmig;

namespace {

// Trapezoid integral of the standard normal density, fine enough to check
// the closed forms to ~1e-10.
double normal_mass(double lo, double hi) {
    const int n = 40000;
    double h = (hi - lo) / n;
    double acc = 0.5 * (stats::norm_pdf(lo) + stats::norm_pdf(hi));
    for (int i = 1; i < n; ++i) acc += stats::norm_pdf(lo + i * h);
    return acc * h;
}

} // namespace

TEST_CASE("normal density basics") {
    CHECK(stats::norm_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * stats::pi)).epsilon(1e-14));
    CHECK(stats::norm_pdf(1.7) == doctest::Approx(stats::norm_pdf(-1.7)).epsilon(1e-15));
    CHECK(stats::norm_pdf(40.0) == 0.0);
}

TEST_CASE("normal cdf against numeric integration") {
    for (double z : {-2.5, -1.0, -0.3, 0.0, 0.7, 1.96, 3.1}) {
        double oracle = normal_mass(-10.0, z);
        CHECK(stats::norm_cdf(z) == doctest::Approx(oracle).epsilon(1e-9));
    }
    CHECK(stats::norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    for (double z : {-6.0, -1.2, 0.4, 5.0}) {
        CHECK(stats::norm_cdf(z) + stats::norm_cdf(-z) == doctest::Approx(1.0).epsilon(1e-13));
    }
    CHECK(stats::norm_cdf(-40.0) == 0.0);
    CHECK(stats::norm_cdf(40.0) == 1.0);
}

TEST_CASE("log normal cdf stays finite deep in the tail") {
    // Moderate range: direct log agreement.
    for (double z : {-8.0, -3.0, -0.5, 1.0, 4.0}) {
        CHECK(stats::norm_logcdf(z) ==
              doctest::Approx(std::log(stats::norm_cdf(z))).epsilon(1e-10));
    }
    // Deep tail: the classic Mills-ratio bounds
    //   phi(z) (1/z - 1/z^3) < Phi(-z) < phi(z)/z   for z > 0
    // give a tight sandwich in log space where norm_cdf itself underflows.
    for (double z : {-15.0, -25.0, -40.0}) {
        double l = stats::norm_logcdf(z);
        CHECK(std::isfinite(l));
        double a = -z;
        double log_pdf = -0.5 * a * a - 0.5 * std::log(2.0 * stats::pi);
        double upper = log_pdf - std::log(a);
        double lower = log_pdf + std::log(1.0 / a - 1.0 / (a * a * a));
        CHECK(l > lower - 1e-9);
        CHECK(l < upper + 1e-9);
    }
    // Monotone in z.
    CHECK(stats::norm_logcdf(-30.0) < stats::norm_logcdf(-29.0));
}

TEST_CASE("log1pexp and logistic cdf") {
    for (double x : {-25.0, -3.0, -0.1, 0.0, 0.1, 3.0, 25.0}) {
        CHECK(stats::log1pexp(x) == doctest::Approx(std::log1p(std::exp(x))).epsilon(1e-14));
        CHECK(stats::logistic_cdf(x) == doctest::Approx(1.0 / (1.0 + std::exp(-x))).epsilon(1e-14));
    }
    CHECK(stats::log1pexp(900.0) == doctest::Approx(900.0).epsilon(1e-15));
    CHECK(stats::log1pexp(-900.0) == doctest::Approx(0.0));
    CHECK(stats::logistic_cdf(900.0) == doctest::Approx(1.0));
    CHECK(stats::logistic_cdf(-900.0) == doctest::Approx(0.0));
    CHECK(stats::logistic_cdf(2.0) + stats::logistic_cdf(-2.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("incomplete beta closed forms") {
    // I_x(1, 1) = x.
    for (double x : {0.0, 0.2, 0.5, 0.9, 1.0}) {
        CHECK(stats::incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    }
    // I_x(2, 2) = 3x^2 - 2x^3 (Beta(2,2) CDF).
    for (double x : {0.1, 0.35, 0.5, 0.8}) {
        CHECK(stats::incomplete_beta(2.0, 2.0, x) ==
              doctest::Approx(3 * x * x - 2 * x * x * x).epsilon(1e-12));
    }
    // Reflection: I_x(a, b) = 1 - I_{1-x}(b, a).
    for (double x : {0.15, 0.4, 0.77}) {
        CHECK(stats::incomplete_beta(2.5, 4.0, x) ==
              doctest::Approx(1.0 - stats::incomplete_beta(4.0, 2.5, 1.0 - x)).epsilon(1e-12));
    }
    // Symmetry point.
    CHECK(stats::incomplete_beta(7.0, 7.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("two sided normal p values") {
    CHECK(stats::p_value_z(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    // 97.5% normal quantile.
    CHECK(stats::p_value_z(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(stats::p_value_z(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(stats::p_value_z(8.0) < 1e-14);
}

TEST_CASE("student t p values") {
    // 97.5% critical value of t with 10 degrees of freedom.
    CHECK(stats::p_value_t(2.2281388519862735, 10.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(stats::p_value_t(-2.2281388519862735, 10.0) == doctest::Approx(0.05).epsilon(1e-9));
    // t with 1 df is Cauchy: P(|T| > 1) = 0.5.
    CHECK(stats::p_value_t(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    // Large df converges to the normal answer.
    CHECK(stats::p_value_t(1.96, 2e6) == doctest::Approx(stats::p_value_z(1.96)).epsilon(1e-5));
    CHECK(stats::p_value_t(0.0, 7.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("f p values") {
    // F(1,1) has median 1.
    CHECK(stats::p_value_f(1.0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    // F(t^2; 1, d) equals the two-sided t p-value.
    CHECK(stats::p_value_f(4.0, 1.0, 10.0) == doctest::Approx(stats::p_value_t(2.0, 10.0)).epsilon(1e-12));
    CHECK(stats::p_value_f(0.0, 3.0, 20.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats::p_value_f(std::numeric_limits<double>::infinity(), 1.0, 5.0) ==
          doctest::Approx(0.0));
    // Monotone decreasing in the statistic.
    CHECK(stats::p_value_f(2.0, 4.0, 30.0) > stats::p_value_f(3.0, 4.0, 30.0));
}
