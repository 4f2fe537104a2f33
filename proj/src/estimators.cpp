#include "qmig/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "qmig/csv.hpp"
#include "qmig/stats.hpp"

namespace qmig {

bool ModelFit::has(const std::string& label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::size_t ModelFit::index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
        throw std::invalid_argument("fit has no coefficient labeled '" + label + "'");
    }
    return static_cast<std::size_t>(it - labels.begin());
}

double ModelFit::coef_of(const std::string& label) const { return coef(index_of(label)); }

double ModelFit::se(std::size_t i) const { return std::sqrt(cov(i, i)); }

double ModelFit::se_of(const std::string& label) const { return se(index_of(label)); }

double ModelFit::stat_of(const std::string& label) const {
    std::size_t i = index_of(label);
    return coef(i) / se(i);
}

double ModelFit::p_value(std::size_t i) const {
    double stat = coef(i) / se(i);
    if (kind == ModelKind::Ols) return stats::p_value_t(stat, df_resid);
    return stats::p_value_z(stat);
}

void ModelFit::write_csv(std::ostream& out) const {
    out << "term,coef,se,z_or_t,p\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double s = se(i);
        out << labels[i] << ',' << csv::format_double(coef(i)) << ','
            << csv::format_double(s) << ',' << csv::format_double(coef(i) / s) << ','
            << csv::format_double(p_value(i)) << '\n';
    }
    out << "n_obs," << n_obs << ",,,\n";
    if (kind == ModelKind::Ols) {
        out << "r_squared," << csv::format_double(r_squared) << ",,,\n";
    } else {
        out << "pseudo_r_squared," << csv::format_double(pseudo_r_squared) << ",,,\n";
    }
    out << "converged," << (converged ? 1 : 0) << ",,,\n";
    if (smearing) {
        out << "smearing," << csv::format_double(*smearing) << ",,,\n";
    }
    for (const auto& d : dropped_columns) {
        out << "dropped_column," << d << ",,,\n";
    }
}

std::string ModelFit::to_csv() const {
    std::ostringstream oss;
    write_csv(oss);
    return oss.str();
}

namespace {

// Collinearity detection by modified Gram-Schmidt over the sqrt(weight)
// scaled columns, in declaration order: a column that projects to (nearly)
// nothing outside the span of earlier kept columns is dropped, so the
// later-declared offender always loses.
std::vector<std::size_t> detect_kept_columns(const Eigen::MatrixXd& Xw,
                                             std::vector<std::size_t>& dropped) {
    const double tol = 1e-10;
    std::vector<Eigen::VectorXd> basis;
    std::vector<std::size_t> kept;
    for (Eigen::Index j = 0; j < Xw.cols(); ++j) {
        Eigen::VectorXd v = Xw.col(j);
        double orig = v.norm();
        for (int pass = 0; pass < 2; ++pass) { // re-orthogonalize for stability
            for (const auto& q : basis) v -= q.dot(v) * q;
        }
        if (v.norm() <= tol * std::max(1.0, orig)) {
            dropped.push_back(static_cast<std::size_t>(j));
        } else {
            basis.push_back(v / v.norm());
            kept.push_back(static_cast<std::size_t>(j));
        }
    }
    return kept;
}

struct ReducedDesign {
    Eigen::MatrixXd X;                 // kept columns only
    std::vector<std::string> labels;   // kept labels
    std::vector<std::string> dropped;  // dropped labels
};

ReducedDesign reduce_design(const DesignMatrix& design) {
    Eigen::VectorXd sw = design.w.cwiseSqrt();
    Eigen::MatrixXd Xw = sw.asDiagonal() * design.X;
    std::vector<std::size_t> dropped_idx;
    std::vector<std::size_t> kept = detect_kept_columns(Xw, dropped_idx);
    ReducedDesign rd;
    rd.X.resize(design.X.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        rd.X.col(static_cast<Eigen::Index>(j)) = design.X.col(static_cast<Eigen::Index>(kept[j]));
        rd.labels.push_back(design.labels[kept[j]]);
    }
    for (std::size_t j : dropped_idx) rd.dropped.push_back(design.labels[j]);
    return rd;
}

Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& A, const char* what) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error(std::string("failed to invert ") + what);
    }
    Eigen::MatrixXd inv =
        ldlt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    if (!inv.allFinite()) {
        throw std::runtime_error(std::string("singular matrix: ") + what);
    }
    return inv;
}

} // namespace

ModelFit ols_fit(const DesignMatrix& design, bool robust) {
    const std::size_t n = design.n_rows();
    if (n == 0) throw std::invalid_argument("empty design");
    if (!(design.w.sum() > 0.0)) {
        throw std::invalid_argument("regression weights sum to zero");
    }
    ReducedDesign rd = reduce_design(design);
    const std::size_t k = rd.labels.size();
    if (n <= k) {
        throw std::invalid_argument("no residual degrees of freedom (" +
                                    std::to_string(n) + " rows, " + std::to_string(k) +
                                    " columns)");
    }

    Eigen::VectorXd sw = design.w.cwiseSqrt();
    Eigen::MatrixXd Xw = sw.asDiagonal() * rd.X;
    Eigen::VectorXd yw = sw.cwiseProduct(design.y);
    Eigen::VectorXd beta = Xw.householderQr().solve(yw);

    ModelFit fit;
    fit.kind = ModelKind::Ols;
    fit.labels = std::move(rd.labels);
    fit.dropped_columns = rd.dropped;
    for (const auto& d : design.dropped_terms) {
        fit.warnings.push_back("single-level term dropped: " + d);
    }
    fit.coef = beta;
    fit.n_obs = n;
    fit.dropped_rows = design.dropped_rows;
    fit.df_resid = static_cast<double>(n - k);
    fit.converged = true;
    fit.residuals = design.y - rd.X * beta;

    Eigen::MatrixXd xtwx = Xw.transpose() * Xw;
    Eigen::MatrixXd bread = symmetric_inverse(xtwx, "X'WX");
    Eigen::ArrayXd we = design.w.array() * fit.residuals.array();
    if (robust) {
        // HC1: bread * meat * bread with the n/(n-k) small-sample scaling.
        Eigen::MatrixXd meat = rd.X.transpose() * (we.square().matrix().asDiagonal() * rd.X);
        fit.cov = bread * meat * bread * (static_cast<double>(n) / fit.df_resid);
    } else {
        double sigma2 = (we * fit.residuals.array()).sum() / fit.df_resid;
        fit.cov = sigma2 * bread;
    }

    double wsum = design.w.sum();
    double ybar = design.w.dot(design.y) / wsum;
    double tss = (design.w.array() * (design.y.array() - ybar).square()).sum();
    double rss = (design.w.array() * fit.residuals.array().square()).sum();
    fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 0.0;

    // Smearing factor for log-scale models: weighted mean of exp(residual).
    fit.smearing = (design.w.array() * fit.residuals.array().exp()).sum() / wsum;
    return fit;
}

Eigen::VectorXd predict_linear(const ModelFit& fit, const DesignMatrix& design) {
    std::unordered_map<std::string, std::size_t> coef_index;
    for (std::size_t i = 0; i < fit.labels.size(); ++i) coef_index[fit.labels[i]] = i;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.X.cols());
    for (std::size_t j = 0; j < design.labels.size(); ++j) {
        auto it = coef_index.find(design.labels[j]);
        if (it != coef_index.end()) {
            beta(static_cast<Eigen::Index>(j)) = fit.coef(static_cast<Eigen::Index>(it->second));
        } else if (std::find(fit.dropped_columns.begin(), fit.dropped_columns.end(),
                             design.labels[j]) == fit.dropped_columns.end()) {
            // Not a coefficient and not a known collinear drop: the design
            // does not belong to this fit.
            throw std::invalid_argument("design column '" + design.labels[j] +
                                        "' is unknown to the fitted model");
        }
    }
    return design.X * beta;
}

Eigen::VectorXd smearing_retransform(const ModelFit& fit,
                                     const Eigen::VectorXd& log_predictions) {
    if (!fit.smearing) {
        throw std::invalid_argument("fit has no smearing factor (not a least-squares fit?)");
    }
    return (log_predictions.array().exp() * (*fit.smearing)).matrix();
}

namespace {

struct MleTerms {
    double loglik = 0.0;
    Eigen::VectorXd score;        // sum_i w_i s_i x_i
    Eigen::MatrixXd neg_hessian;  // sum_i w_i h_i x_i x_i'
    Eigen::ArrayXd fitted;        // P(y=1 | x_i)
    Eigen::ArrayXd per_obs_score; // s_i (per-observation score factor)
};

MleTerms mle_terms(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w, const Eigen::VectorXd& beta,
                   ModelKind link) {
    const Eigen::Index n = X.rows();
    Eigen::VectorXd eta = X * beta;
    MleTerms t;
    t.fitted.resize(n);
    t.per_obs_score.resize(n);
    Eigen::ArrayXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (link == ModelKind::Probit) {
            double q = y(i) > 0.5 ? 1.0 : -1.0;
            double z = q * eta(i);
            double logphi = -0.5 * z * z - 0.5 * std::log(2.0 * stats::pi);
            double logcdf = stats::norm_logcdf(z);
            double lambda = std::exp(logphi - logcdf); // inverse Mills ratio at z
            t.loglik += w(i) * logcdf;
            t.per_obs_score(i) = q * lambda;
            h(i) = lambda * (lambda + z); // positive: observed information
            t.fitted(i) = stats::norm_cdf(eta(i));
        } else {
            double p = stats::logistic_cdf(eta(i));
            t.loglik += w(i) * (y(i) * eta(i) - stats::log1pexp(eta(i)));
            t.per_obs_score(i) = y(i) - p;
            h(i) = p * (1.0 - p);
            t.fitted(i) = p;
        }
    }
    Eigen::ArrayXd ws = w.array() * t.per_obs_score;
    t.score = X.transpose() * ws.matrix();
    t.neg_hessian = X.transpose() * ((w.array() * h).matrix().asDiagonal() * X);
    return t;
}

} // namespace

ModelFit binary_mle_fit(const DesignMatrix& design, ModelKind link, bool robust) {
    if (link != ModelKind::Probit && link != ModelKind::Logit) {
        throw std::invalid_argument("binary_mle_fit wants Probit or Logit");
    }
    const std::size_t n = design.n_rows();
    if (n == 0) throw std::invalid_argument("empty design");
    for (Eigen::Index i = 0; i < design.y.size(); ++i) {
        if (design.y(i) != 0.0 && design.y(i) != 1.0) {
            throw std::invalid_argument("binary response must be coded 0/1");
        }
    }
    double wsum = design.w.sum();
    double ybar = design.w.dot(design.y) / wsum;
    if (!(ybar > 0.0) || !(ybar < 1.0)) {
        throw std::invalid_argument("binary response has no variation");
    }

    ReducedDesign rd = reduce_design(design);
    const std::size_t k = rd.labels.size();
    if (n <= k) {
        throw std::invalid_argument("no residual degrees of freedom");
    }

    // Column scales for the separation diagnostic.
    Eigen::VectorXd col_sd(rd.X.cols());
    for (Eigen::Index j = 0; j < rd.X.cols(); ++j) {
        double mean = rd.X.col(j).mean();
        col_sd(j) = std::sqrt((rd.X.col(j).array() - mean).square().sum() /
                              static_cast<double>(n));
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    MleTerms cur = mle_terms(rd.X, design.y, design.w, beta, link);
    bool converged = false;
    for (int iter = 0; iter < 100 && !converged; ++iter) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.neg_hessian);
        Eigen::VectorXd delta = ldlt.solve(cur.score);
        if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
            throw std::runtime_error("singular information matrix in binary fit");
        }
        // Damped step: halve until the log-likelihood stops deteriorating.
        double step = 1.0;
        MleTerms next = cur;
        for (int half = 0; half < 40; ++half) {
            Eigen::VectorXd candidate = beta + step * delta;
            next = mle_terms(rd.X, design.y, design.w, candidate, link);
            if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12) {
                beta = candidate;
                break;
            }
            step *= 0.5;
        }
        cur = next;
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            if (col_sd(j) > 1e-12 && std::fabs(beta(j)) * col_sd(j) > 30.0) {
                throw SeparationError("probable separation: coefficient on '" +
                                      rd.labels[static_cast<std::size_t>(j)] +
                                      "' diverged");
            }
        }
        if (cur.score.cwiseAbs().maxCoeff() < 1e-8 ||
            (step * delta).cwiseAbs().maxCoeff() < 1e-10) {
            converged = true;
        }
    }

    ModelFit fit;
    fit.kind = link;
    fit.labels = std::move(rd.labels);
    fit.dropped_columns = rd.dropped;
    for (const auto& d : design.dropped_terms) {
        fit.warnings.push_back("single-level term dropped: " + d);
    }
    fit.coef = beta;
    fit.n_obs = n;
    fit.dropped_rows = design.dropped_rows;
    fit.df_resid = static_cast<double>(n - k);
    fit.converged = converged;
    if (!converged) fit.warnings.push_back("maximum likelihood did not converge");
    fit.loglik = cur.loglik;
    fit.residuals = design.y - cur.fitted.matrix();

    Eigen::MatrixXd info_inv = symmetric_inverse(cur.neg_hessian, "information matrix");
    if (robust) {
        Eigen::ArrayXd ws = design.w.array() * cur.per_obs_score;
        Eigen::MatrixXd meat = rd.X.transpose() * (ws.square().matrix().asDiagonal() * rd.X);
        fit.cov = info_inv * meat * info_inv;
    } else {
        fit.cov = info_inv;
    }

    // McFadden pseudo R^2 against the intercept-only likelihood.
    double ll0 = wsum * (ybar * std::log(ybar) + (1.0 - ybar) * std::log1p(-ybar));
    fit.pseudo_r_squared = 1.0 - cur.loglik / ll0;
    return fit;
}

Eigen::VectorXd predict_response(const ModelFit& fit, const DesignMatrix& design) {
    Eigen::VectorXd eta = predict_linear(fit, design);
    if (fit.kind == ModelKind::Ols) return eta;
    Eigen::VectorXd p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        p(i) = fit.kind == ModelKind::Probit ? stats::norm_cdf(eta(i))
                                             : stats::logistic_cdf(eta(i));
    }
    return p;
}

ModelFit did_fit(const DataTable& data, const DidSpec& spec, bool robust) {
    DesignSpec ds;
    ds.response = spec.outcome;
    ds.weight = spec.weight;
    ds.terms.push_back(Term::continuous(spec.treat));
    ds.terms.push_back(Term::continuous(spec.group));
    ds.terms.push_back(Term::interaction(spec.treat, spec.group));
    for (const auto& t : spec.covariates) ds.terms.push_back(t);

    DesignMatrix design = build_design(data, ds);
    std::size_t treat_col = 0, group_col = 0;
    for (std::size_t j = 0; j < design.labels.size(); ++j) {
        if (design.labels[j] == spec.treat) treat_col = j;
        if (design.labels[j] == spec.group) group_col = j;
    }
    std::size_t cells[2][2] = {{0, 0}, {0, 0}};
    for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
        double t = design.X(i, static_cast<Eigen::Index>(treat_col));
        double g = design.X(i, static_cast<Eigen::Index>(group_col));
        if ((t != 0.0 && t != 1.0) || (g != 0.0 && g != 1.0)) {
            throw std::invalid_argument("treat and group indicators must be coded 0/1");
        }
        ++cells[t == 1.0 ? 1 : 0][g == 1.0 ? 1 : 0];
    }
    std::vector<std::string> empty_cells;
    for (int t = 0; t < 2; ++t) {
        for (int g = 0; g < 2; ++g) {
            if (cells[t][g] == 0) {
                empty_cells.push_back("(" + spec.treat + "=" + std::to_string(t) + "," +
                                      spec.group + "=" + std::to_string(g) + ")");
            }
        }
    }
    if (!empty_cells.empty() && spec.covariates.empty()) {
        std::string msg = "empty treatment cell";
        for (const auto& c : empty_cells) msg += " " + c;
        throw std::invalid_argument(msg);
    }

    ModelFit fit = ols_fit(design, robust);
    for (const auto& c : empty_cells) {
        fit.warnings.push_back("empty treatment cell " + c +
                               "; effect identified only through covariates");
    }
    return fit;
}

DidCells did_cell_means(const DataTable& data, const std::string& outcome,
                        const std::string& treat, const std::string& group,
                        const std::string& weight) {
    const auto& y = data.column(outcome);
    const auto& t = data.column(treat);
    const auto& g = data.column(group);
    const std::vector<double>* w = weight.empty() ? nullptr : &data.column(weight);
    double sums[2][2] = {{0, 0}, {0, 0}};
    double wsum[2][2] = {{0, 0}, {0, 0}};
    std::size_t counts[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        double wi = w ? (*w)[i] : 1.0;
        if (std::isnan(y[i]) || std::isnan(t[i]) || std::isnan(g[i]) || std::isnan(wi)) {
            continue;
        }
        int ti = t[i] == 1.0 ? 1 : 0;
        int gi = g[i] == 1.0 ? 1 : 0;
        sums[ti][gi] += wi * y[i];
        wsum[ti][gi] += wi;
        ++counts[ti][gi];
    }
    DidCells c;
    c.m00 = wsum[0][0] > 0 ? sums[0][0] / wsum[0][0] : std::nan("");
    c.m01 = wsum[0][1] > 0 ? sums[0][1] / wsum[0][1] : std::nan("");
    c.m10 = wsum[1][0] > 0 ? sums[1][0] / wsum[1][0] : std::nan("");
    c.m11 = wsum[1][1] > 0 ? sums[1][1] / wsum[1][1] : std::nan("");
    c.n00 = counts[0][0];
    c.n01 = counts[0][1];
    c.n10 = counts[1][0];
    c.n11 = counts[1][1];
    return c;
}

MeanTest mean_equality_test(const DataTable& data, const std::string& variable,
                            const std::string& group_flag, const std::string& weight) {
    const auto& y = data.column(variable);
    const auto& g = data.column(group_flag);
    const std::vector<double>* w = weight.empty() ? nullptr : &data.column(weight);

    std::vector<double> yv, wv;
    std::vector<int> gv;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        double wi = w ? (*w)[i] : 1.0;
        if (std::isnan(y[i]) || std::isnan(g[i]) || std::isnan(wi)) continue;
        if (g[i] != 0.0 && g[i] != 1.0) {
            throw std::invalid_argument("group flag must be coded 0/1");
        }
        yv.push_back(y[i]);
        gv.push_back(g[i] == 1.0 ? 1 : 0);
        wv.push_back(wi);
    }
    const std::size_t n = yv.size();
    MeanTest result;
    for (int v : gv) {
        if (v == 0) ++result.n0;
        else ++result.n1;
    }
    if (result.n0 == 0 || result.n1 == 0) {
        throw std::invalid_argument("mean_equality_test needs both groups non-empty");
    }

    // Normalize weights to sum to n so the F statistic has the usual scale.
    double wtot = 0.0;
    for (double wi : wv) wtot += wi;
    if (!(wtot > 0.0)) throw std::invalid_argument("weights sum to zero");
    double scale = static_cast<double>(n) / wtot;

    double sw[2] = {0, 0}, sy[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        double wi = wv[i] * scale;
        sw[gv[i]] += wi;
        sy[gv[i]] += wi * yv[i];
    }
    result.mean0 = sy[0] / sw[0];
    result.mean1 = sy[1] / sw[1];
    double grand = (sy[0] + sy[1]) / static_cast<double>(n);
    double means[2] = {result.mean0, result.mean1};
    double bss = sw[0] * (means[0] - grand) * (means[0] - grand) +
                 sw[1] * (means[1] - grand) * (means[1] - grand);
    double wss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = yv[i] - means[gv[i]];
        wss += wv[i] * scale * d * d;
    }

    if (n < 3) throw std::invalid_argument("mean_equality_test needs at least 3 observations");
    double eps = 1e-20 * (1.0 + grand * grand);
    if (bss <= eps) {
        result.f = 0.0;
        result.p = 1.0;
    } else if (wss <= eps) {
        result.f = std::numeric_limits<double>::infinity();
        result.p = 0.0;
    } else {
        result.f = bss / (wss / static_cast<double>(n - 2));
        result.p = stats::p_value_f(result.f, 1.0, static_cast<double>(n - 2));
    }
    return result;
}

} // namespace qmig
