#include "doctest.h"

#include "qmig/data_table.hpp"
#include "qmig/design.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace qmig;

namespace {

const double kNan = std::nan("");

DataTable toy_table() {
    DataTable t;
    t.add_column("y", {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    t.add_column("x", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0});
    t.add_column("z", {1.0, 0.0, 1.0, 0.0, 1.0, 0.0});
    t.add_column("cat", {1.0, 2.0, 3.0, 2.0, 1.0, 3.0});
    t.add_column("grp", {1.0, 1.0, 2.0, 2.0, 3.0, 3.0});
    t.add_column("wt", {1.0, 2.0, 1.0, 1.0, 0.5, 1.0});
    return t;
}

} // namespace

TEST_CASE("data table columns and filtering") {
    DataTable t = toy_table();
    CHECK(t.n_rows() == 6);
    CHECK(t.n_cols() == 6);
    CHECK(t.has_column("cat"));
    CHECK_FALSE(t.has_column("nope"));
    CHECK_THROWS_AS(t.column("nope"), std::invalid_argument);
    CHECK_THROWS_AS(t.add_column("short", {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(t.add_column("y", {1, 2, 3, 4, 5, 6}), std::invalid_argument);

    DataTable f = t.filter({true, false, true, false, false, true});
    CHECK(f.n_rows() == 3);
    CHECK(f.column("y") == std::vector<double>{1.0, 3.0, 6.0});
    CHECK(f.column_names() == t.column_names());
}

TEST_CASE("design expansion: labels, indicators, interactions") {
    DataTable t = toy_table();
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x"), Term::categorical("cat", 1.0),
                  Term::interaction("x", "z"), Term::fixed_effect("grp")};
    DesignMatrix d = build_design(t, spec);

    std::vector<std::string> want = {"const", "x", "cat=2", "cat=3", "x:z", "grp=2", "grp=3"};
    CHECK(d.labels == want);
    CHECK(d.n_rows() == 6);
    CHECK(d.dropped_rows == 0);
    CHECK(d.has_intercept);

    // Row 1: x=1, cat=2, z=0, grp=1.
    CHECK(d.X(1, 0) == 1.0);
    CHECK(d.X(1, 1) == 1.0);
    CHECK(d.X(1, 2) == 1.0); // cat=2 indicator
    CHECK(d.X(1, 3) == 0.0);
    CHECK(d.X(1, 4) == 0.0); // x*z
    CHECK(d.X(1, 5) == 0.0);
    // Row 2: x=1.5, z=1, grp=2.
    CHECK(d.X(2, 4) == 1.5);
    CHECK(d.X(2, 5) == 1.0);
    CHECK(d.y(2) == 3.0);
    CHECK(d.w(2) == 1.0); // no weight column: all ones
}

TEST_CASE("missing values drop rows listwise") {
    DataTable t = toy_table();
    t.column("x")[1] = kNan;
    t.column("y")[4] = kNan;
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    spec.weight = "wt";
    DesignMatrix d = build_design(t, spec);
    CHECK(d.n_rows() == 4);
    CHECK(d.dropped_rows == 2);
    CHECK(d.row_index == std::vector<std::size_t>{0, 2, 3, 5});
    CHECK(d.w(1) == 1.0);

    // For prediction the missing response row is kept, missing x still drops.
    DesignMatrix p = build_design(t, spec, true);
    CHECK(p.n_rows() == 5);
    CHECK(p.dropped_rows == 1);
    CHECK(std::isnan(p.y(3))); // table row 4
}

TEST_CASE("degenerate terms are dropped and reported") {
    DataTable t = toy_table();
    t.add_column("flat", {7.0, 7.0, 7.0, 7.0, 7.0, 7.0});
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::categorical("flat", 7.0), Term::continuous("x")};
    DesignMatrix d = build_design(t, spec);
    CHECK(d.labels == std::vector<std::string>{"const", "x"});
    CHECK(d.dropped_terms == std::vector<std::string>{"flat"});

    // Absent baseline level is an error, not a silent recode.
    DesignSpec bad;
    bad.response = "y";
    bad.terms = {Term::categorical("cat", 9.0)};
    CHECK_THROWS_AS(build_design(t, bad), std::invalid_argument);
}

TEST_CASE("intercept can be disabled") {
    DataTable t = toy_table();
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x")};
    spec.intercept = false;
    DesignMatrix d = build_design(t, spec);
    CHECK(d.labels == std::vector<std::string>{"x"});
    CHECK_FALSE(d.has_intercept);
}

TEST_CASE("validation errors") {
    DataTable t = toy_table();
    DesignSpec spec;
    spec.terms = {Term::continuous("x")};
    // No response for an estimation design.
    CHECK_THROWS_AS(build_design(t, spec), std::invalid_argument);
    // Unknown variable.
    spec.response = "y";
    spec.terms = {Term::continuous("missing_var")};
    CHECK_THROWS_AS(build_design(t, spec), std::invalid_argument);
    // Negative weight.
    DataTable t2 = toy_table();
    t2.column("wt")[0] = -1.0;
    DesignSpec ws;
    ws.response = "y";
    ws.terms = {Term::continuous("x")};
    ws.weight = "wt";
    CHECK_THROWS_AS(build_design(t2, ws), std::invalid_argument);
    // All rows missing.
    DataTable t3 = toy_table();
    for (auto& v : t3.column("x")) v = kNan;
    DesignSpec xs;
    xs.response = "y";
    xs.terms = {Term::continuous("x")};
    CHECK_THROWS_AS(build_design(t3, xs), std::invalid_argument);
}

TEST_CASE("select_rows keeps labels and metadata") {
    DataTable t = toy_table();
    DesignSpec spec;
    spec.response = "y";
    spec.terms = {Term::continuous("x"), Term::categorical("cat", 1.0)};
    DesignMatrix d = build_design(t, spec);
    DesignMatrix s = d.select_rows({true, false, false, true, false, true});
    CHECK(s.n_rows() == 3);
    CHECK(s.labels == d.labels);
    CHECK(s.y(1) == 4.0);
    CHECK(s.row_index == std::vector<std::size_t>{0, 3, 5});
    CHECK(s.X(2, 1) == 3.0);
    CHECK_THROWS_AS(d.select_rows({true, false}), std::invalid_argument);
}
