#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "qmig/data_table.hpp"

// Regression design construction.  A DesignSpec names the response, the
// regressors (continuous, categorical with a declared baseline level,
// pairwise interactions, fixed-effect blocks), and an optional weight
// column; build_design expands it against a DataTable into a dense matrix
// with stable, human-readable column labels.

namespace qmig {

enum class TermKind { Continuous, Categorical, Interaction, FixedEffect };

struct Term {
    TermKind kind = TermKind::Continuous;
    std::string name;   // variable (or first interaction operand)
    std::string other;  // second interaction operand
    double baseline = 0.0;

    static Term continuous(std::string name);
    static Term categorical(std::string name, double baseline);
    static Term interaction(std::string a, std::string b);
    static Term fixed_effect(std::string name);
};

struct DesignSpec {
    std::string response;
    std::vector<Term> terms;
    std::string weight;      // empty = unweighted (all ones)
    bool intercept = true;
};

// Expanded design.  Rows with a missing value in any referenced column are
// dropped (listwise deletion) and counted; row_index maps design rows back
// to table rows.  Categorical terms get one indicator per non-baseline
// level, labeled "name=level"; fixed effects drop their smallest level.
// Terms that collapse to a single level contribute no columns and are
// reported in dropped_terms.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    std::vector<std::string> labels;
    std::vector<std::string> dropped_terms;
    std::vector<std::size_t> row_index;
    std::size_t dropped_rows = 0;
    bool has_intercept = true;

    std::size_t n_rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t n_cols() const { return static_cast<std::size_t>(X.cols()); }

    // New design holding the subset of rows with keep[i] == true; labels and
    // metadata carry over, so fits on slices stay column-compatible.
    DesignMatrix select_rows(const std::vector<bool>& keep) const;
};

// Builds the design for estimation.  With for_prediction = true the response
// column is not required (y is left as NaN where missing) and rows are kept
// even when the response is missing — covariates and weight must still be
// observed.
DesignMatrix build_design(const DataTable& data, const DesignSpec& spec,
                          bool for_prediction = false);

} // namespace qmig
