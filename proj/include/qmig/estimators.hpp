#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmig/design.hpp"

// Regression estimators: weighted least squares with heteroskedasticity
// robust covariance, probit/logit maximum likelihood, a
// difference-in-differences wrapper, and a weighted one-way mean-equality
// F test.  All estimators consume a DesignMatrix built by build_design and
// return a ModelFit keyed by column label.

namespace qmig {

enum class ModelKind { Ols, Probit, Logit };

// Raised when a binary-response fit diverges because a column separates the
// outcome; carries the offending column in what().
struct SeparationError : std::runtime_error {
    explicit SeparationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelFit {
    ModelKind kind = ModelKind::Ols;
    std::vector<std::string> labels;  // kept columns, in design order
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;
    Eigen::VectorXd residuals;        // ols: y - Xb; mle: y - fitted prob
    std::size_t n_obs = 0;
    double df_resid = 0.0;
    double r_squared = 0.0;           // ols only
    double pseudo_r_squared = 0.0;    // mle only (McFadden)
    double loglik = 0.0;              // mle only
    bool converged = false;
    std::optional<double> smearing;   // ols only: mean of exp(residuals)
    std::vector<std::string> dropped_columns; // collinear columns removed
    std::size_t dropped_rows = 0;             // listwise-deleted rows
    std::vector<std::string> warnings;

    bool has(const std::string& label) const;
    std::size_t index_of(const std::string& label) const; // throws if absent
    double coef_of(const std::string& label) const;
    double se(std::size_t i) const;
    double se_of(const std::string& label) const;
    double stat_of(const std::string& label) const; // coef / se
    // Two-sided p-value for coefficient i (t for OLS, z for MLE).
    double p_value(std::size_t i) const;

    // CSV: "term,coef,se,z_or_t,p" rows followed by footer rows (n_obs,
    // fit statistic, converged flag, dropped columns if any).
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
};

// Weighted least squares via Householder QR on the sqrt(weight)-scaled
// design.  Collinear columns are detected in declaration order and the
// later-declared offenders are dropped (reported in dropped_columns).
// robust = true gives the HC1 covariance; otherwise the classical one.
ModelFit ols_fit(const DesignMatrix& design, bool robust = true);

// Linear prediction X * beta, matching design columns to fit coefficients
// by label.  Columns the fit dropped as collinear contribute zero effect;
// a design column that is neither a coefficient nor a recorded drop is an
// error.  Fit coefficients with no matching design column (e.g. indicator
// levels absent from the prediction rows) contribute nothing.
Eigen::VectorXd predict_linear(const ModelFit& fit, const DesignMatrix& design);

// Re-transforms log-scale predictions to levels with the nonparametric
// smearing factor stored on the fit: level = exp(log_pred) * mean(exp(e)).
Eigen::VectorXd smearing_retransform(const ModelFit& fit,
                                     const Eigen::VectorXd& log_predictions);

// Probit / logit maximum likelihood via damped Newton iterations on the
// analytic score and observed information.  Weights act as frequency
// weights.  Throws SeparationError when a standardized coefficient runs
// away (|beta * sd| > 30); reports converged = false when the iteration cap
// is reached without meeting the tolerance.
ModelFit binary_mle_fit(const DesignMatrix& design, ModelKind link, bool robust = true);

// Fitted response for the rows of design: X*beta for OLS, link(X*beta) for
// probit/logit.
Eigen::VectorXd predict_response(const ModelFit& fit, const DesignMatrix& design);

// Difference-in-differences specification: outcome on treat, group, their
// interaction (the DiD effect), and optional covariate terms.
struct DidSpec {
    std::string outcome;
    std::string treat;   // 0/1 exposure indicator
    std::string group;   // 0/1 comparison-group indicator
    std::vector<Term> covariates;
    std::string weight;  // empty = unweighted
};

// Robust-OLS DiD.  The effect is the interaction coefficient, labeled
// "<treat>:<group>" after the two column names.
// An empty treat-by-group cell is an error without covariates and a
// recorded warning with them.
ModelFit did_fit(const DataTable& data, const DidSpec& spec, bool robust = true);

// Weighted means of outcome by the four treat-by-group cells; useful for
// checking the saturated-model identity theta = (m11-m10) - (m01-m00).
struct DidCells {
    double m00 = 0.0, m01 = 0.0, m10 = 0.0, m11 = 0.0;
    std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};
DidCells did_cell_means(const DataTable& data, const std::string& outcome,
                        const std::string& treat, const std::string& group,
                        const std::string& weight = "");

// Weighted one-way ANOVA F test that the mean of `variable` is equal across
// the two groups defined by `group_flag` (0/1).  Weights are normalized to
// sum to the number of observations.  Identical groups give F = 0, p = 1;
// zero within-group variance with distinct means gives F = +infinity, p = 0.
struct MeanTest {
    double f = 0.0;
    double p = 1.0;
    double mean0 = 0.0;
    double mean1 = 0.0;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
};
MeanTest mean_equality_test(const DataTable& data, const std::string& variable,
                            const std::string& group_flag,
                            const std::string& weight = "");

} // namespace qmig
