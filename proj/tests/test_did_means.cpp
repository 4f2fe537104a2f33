#include "doctest.h"

#include "qmig/data_table.hpp"
#include "qmig/design.hpp"
#include "qmig/estimators.hpp"
#include "qmig/rng.hpp"

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

using namespace qmig;

namespace {

DataTable random_did_table(std::uint64_t seed, std::size_t n, bool with_weights) {
    Rng rng = make_rng(seed, 0x04ULL);
    std::vector<double> y(n), treat(n), group(n), w(n), cov(n);
    for (std::size_t i = 0; i < n; ++i) {
        treat[i] = next_unit(rng) < 0.5 ? 1.0 : 0.0;
        group[i] = next_unit(rng) < 0.4 ? 1.0 : 0.0;
        cov[i] = next_normal(rng);
        w[i] = with_weights ? std::exp(0.3 * next_normal(rng)) : 1.0;
        y[i] = 0.5 + 0.8 * treat[i] - 0.4 * group[i] + 0.25 * treat[i] * group[i] +
               0.3 * cov[i] + 0.6 * next_normal(rng);
    }
    DataTable t;
    t.add_column("y", y);
    t.add_column("treat", treat);
    t.add_column("group", group);
    t.add_column("cov", cov);
    t.add_column("w", w);
    return t;
}

} // namespace

TEST_CASE("saturated fit reproduces the four cell means identity") {
    for (bool weighted : {false, true}) {
        DataTable t = random_did_table(weighted ? 21 : 20, 300, weighted);
        DidSpec spec;
        spec.outcome = "y";
        spec.treat = "treat";
        spec.group = "group";
        if (weighted) spec.weight = "w";
        ModelFit fit = did_fit(t, spec);
        DidCells c = did_cell_means(t, "y", "treat", "group", spec.weight);

        CHECK(fit.coef_of("const") == doctest::Approx(c.m00).epsilon(1e-10));
        CHECK(fit.coef_of("treat") == doctest::Approx(c.m10 - c.m00).epsilon(1e-9));
        CHECK(fit.coef_of("group") == doctest::Approx(c.m01 - c.m00).epsilon(1e-9));
        double theta = (c.m11 - c.m10) - (c.m01 - c.m00);
        CHECK(fit.coef_of("treat:group") == doctest::Approx(theta).epsilon(1e-9));
        CHECK(c.n00 + c.n01 + c.n10 + c.n11 == 300);
    }
}

TEST_CASE("cell means respect the weights") {
    DataTable t;
    t.add_column("y", {1.0, 3.0, 10.0, 20.0, 5.0, 7.0});
    t.add_column("tr", {0.0, 0.0, 1.0, 1.0, 0.0, 1.0});
    t.add_column("gr", {0.0, 0.0, 0.0, 0.0, 1.0, 1.0});
    t.add_column("w", {1.0, 3.0, 2.0, 2.0, 1.0, 1.0});
    DidCells c = did_cell_means(t, "y", "tr", "gr", "w");
    CHECK(c.m00 == doctest::Approx((1.0 + 9.0) / 4.0).epsilon(1e-14));
    CHECK(c.m10 == doctest::Approx(15.0).epsilon(1e-14));
    CHECK(c.m01 == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(c.m11 == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(c.n00 == 2);
    CHECK(c.n10 == 2);

    DidCells u = did_cell_means(t, "y", "tr", "gr");
    CHECK(u.m00 == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("covariates keep the effect label and estimate close to truth") {
    DataTable t = random_did_table(22, 4000, false);
    DidSpec spec;
    spec.outcome = "y";
    spec.treat = "treat";
    spec.group = "group";
    spec.covariates = {Term::continuous("cov")};
    ModelFit fit = did_fit(t, spec);
    CHECK(fit.has("treat:group"));
    CHECK(fit.has("cov"));
    // Planted interaction 0.25; the covariate is independent of the cells,
    // so the adjusted estimate stays near the truth.
    CHECK(fit.coef_of("treat:group") == doctest::Approx(0.25).epsilon(0.45));
    CHECK(fit.coef_of("cov") == doctest::Approx(0.3).epsilon(0.12));
}

TEST_CASE("empty cells: error bare, warning with covariates") {
    DataTable t;
    // No (treat=1, group=1) observations.
    t.add_column("y", {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    t.add_column("tr", {0.0, 0.0, 1.0, 1.0, 0.0, 0.0});
    t.add_column("gr", {0.0, 0.0, 0.0, 0.0, 1.0, 1.0});
    t.add_column("cov", {0.1, -0.2, 0.3, 0.0, 0.2, -0.1});
    DidSpec spec;
    spec.outcome = "y";
    spec.treat = "tr";
    spec.group = "gr";
    CHECK_THROWS_AS(did_fit(t, spec), std::invalid_argument);

    spec.covariates = {Term::continuous("cov")};
    ModelFit fit = did_fit(t, spec);
    bool warned = false;
    for (const auto& wmsg : fit.warnings) {
        if (wmsg.find("empty treatment cell") != std::string::npos) warned = true;
    }
    CHECK(warned);

    // Non-binary indicators are rejected outright.
    DataTable bad;
    bad.add_column("y", {1.0, 2.0, 3.0, 4.0});
    bad.add_column("tr", {0.0, 2.0, 1.0, 0.0});
    bad.add_column("gr", {0.0, 1.0, 0.0, 1.0});
    DidSpec bs;
    bs.outcome = "y";
    bs.treat = "tr";
    bs.group = "gr";
    CHECK_THROWS_AS(did_fit(bad, bs), std::invalid_argument);
}

TEST_CASE("mean equality test against the hand anova") {
    DataTable t;
    t.add_column("v", {1.0, 2.0, 3.0, 6.0, 7.0, 8.0, 9.0});
    t.add_column("g", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0});
    MeanTest m = mean_equality_test(t, "v", "g");
    CHECK(m.n0 == 3);
    CHECK(m.n1 == 4);
    CHECK(m.mean0 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(m.mean1 == doctest::Approx(7.5).epsilon(1e-14));
    // One-way ANOVA by hand: BSS with one between df, WSS with n-2.
    double grand = (1 + 2 + 3 + 6 + 7 + 8 + 9) / 7.0;
    double bss = 3 * (2.0 - grand) * (2.0 - grand) + 4 * (7.5 - grand) * (7.5 - grand);
    double wss = (1 + 0 + 1) + (2.25 + 0.25 + 0.25 + 2.25);
    double f = bss / (wss / 5.0);
    CHECK(m.f == doctest::Approx(f).epsilon(1e-12));
    CHECK(m.p < 0.01);
    CHECK(m.p > 0.0);
}

TEST_CASE("mean equality edge cases") {
    DataTable t;
    t.add_column("v", {5.0, 5.0, 5.0, 5.0});
    t.add_column("g", {0.0, 0.0, 1.0, 1.0});
    MeanTest same = mean_equality_test(t, "v", "g");
    CHECK(same.f == 0.0);
    CHECK(same.p == 1.0);

    DataTable s;
    s.add_column("v", {1.0, 1.0, 4.0, 4.0});
    s.add_column("g", {0.0, 0.0, 1.0, 1.0});
    MeanTest split = mean_equality_test(s, "v", "g");
    CHECK(std::isinf(split.f));
    CHECK(split.p == 0.0);

    // Scaling all weights leaves the statistic unchanged; unit weights
    // reproduce the unweighted answer.
    DataTable w;
    w.add_column("v", {1.0, 2.0, 3.0, 6.0, 7.0, 9.0});
    w.add_column("g", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0});
    w.add_column("w1", {2.0, 1.0, 1.5, 1.0, 2.0, 0.5});
    w.add_column("w2", {20.0, 10.0, 15.0, 10.0, 20.0, 5.0});
    w.add_column("ones", {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    MeanTest a = mean_equality_test(w, "v", "g", "w1");
    MeanTest b = mean_equality_test(w, "v", "g", "w2");
    CHECK(a.f == doctest::Approx(b.f).epsilon(1e-12));
    CHECK(a.mean0 == doctest::Approx(b.mean0).epsilon(1e-12));
    MeanTest plain = mean_equality_test(w, "v", "g");
    MeanTest ones = mean_equality_test(w, "v", "g", "ones");
    CHECK(plain.f == doctest::Approx(ones.f).epsilon(1e-14));

    // Single-group data cannot be tested.
    DataTable one;
    one.add_column("v", {1.0, 2.0, 3.0});
    one.add_column("g", {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(mean_equality_test(one, "v", "g"), std::invalid_argument);

    // Missing rows are skipped.
    DataTable miss;
    miss.add_column("v", {1.0, std::nan(""), 3.0, 6.0, 7.0, 9.0});
    miss.add_column("g", {0.0, 0.0, 0.0, 1.0, 1.0, 1.0});
    MeanTest mm = mean_equality_test(miss, "v", "g");
    CHECK(mm.n0 == 2);
    CHECK(mm.n1 == 3);
    CHECK(mm.mean0 == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("did estimate is invariant to covariate-free weighting scale") {
    DataTable t = random_did_table(25, 500, true);
    DidSpec spec;
    spec.outcome = "y";
    spec.treat = "treat";
    spec.group = "group";
    spec.weight = "w";
    ModelFit fit = did_fit(t, spec);
    // Double every weight: same point estimates.
    for (auto& wi : t.column("w")) wi *= 2.0;
    ModelFit fit2 = did_fit(t, spec);
    CHECK(fit.coef_of("treat:group") == doctest::Approx(fit2.coef_of("treat:group")).epsilon(1e-10));
}
