#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

// Discrete lotteries and the preference functionals defined over them.
//
// A lottery is a finite list of (outcome, probability) atoms.  Three families
// of decision rules are implemented:
//
//   * quantile maximization: rank lotteries by the tau-th quantile of their
//     outcome distribution.  tau = 0 ranks by the worst outcome in the
//     support (maxmin), tau = 1 by the best (maxmax);
//   * expected utility: rank by sum_i p_i u(x_i) for increasing u;
//   * probability-weighted utility: rank by sum_i w(p_i) u(x_i) for a
//     distortion w with w(0) = 0 and w(1) = 1.
//
// Stochastic order checks (first-order dominance, mean-preserving spreads)
// operate on the step CDFs and are exact up to a small absolute tolerance.

namespace qmig {

struct Outcome {
    double value = 0.0;
    double probability = 0.0;
};

// Immutable discrete lottery.  Construction canonicalizes the atom list:
// outcomes are sorted ascending, duplicate values are merged by summing
// probability, and zero-probability atoms are removed.  Probabilities must
// be non-negative and sum to 1; a total within 1e-9 of 1 is renormalized,
// anything farther off is rejected.
class Lottery {
public:
    explicit Lottery(std::vector<Outcome> atoms);

    // Equal-probability lottery over the given outcome values.
    static Lottery uniform(const std::vector<double>& values);

    const std::vector<Outcome>& outcomes() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    double min_outcome() const { return atoms_.front().value; }
    double max_outcome() const { return atoms_.back().value; }
    double mean() const;

    // P(X <= v), right-continuous step function.
    double cdf_at(double v) const;

    // Cumulative probability after atom i (clamped so the last entry is 1).
    const std::vector<double>& cumulative() const { return cum_; }

    // Lottery with every outcome value mapped through f (probabilities kept).
    Lottery map_outcomes(const std::function<double(double)>& f) const;

    // Serialization: CSV with header "value,probability", one atom per line.
    static Lottery read_csv(std::istream& in);
    void write_csv(std::ostream& out) const;

private:
    std::vector<Outcome> atoms_; // sorted ascending, merged, positive masses
    std::vector<double> cum_;    // running probability totals, back() == 1
};

// Increasing (Bernoulli) utility index.  The library never differentiates u,
// so any callable works; strict monotonicity is the caller's contract and
// can be spot-checked with check_increasing.
struct UtilityFn {
    std::function<double(double)> u;
    double operator()(double x) const { return u(x); }
};

// Probability distortion for weighted utility.  Constructor enforces the
// endpoint conditions w(0) = 0 and w(1) = 1; monotonicity between the
// endpoints is the caller's contract (see check_increasing).
class WeightFn {
public:
    explicit WeightFn(std::function<double(double)> w);
    double operator()(double p) const { return w_(p); }

private:
    std::function<double(double)> w_;
};

// Samples f on an equally spaced grid over [lo, hi] and reports whether the
// sampled values are strictly increasing.
bool check_increasing(const std::function<double(double)>& f, double lo, double hi,
                      int points = 64);

enum class Preference { First, Second, Indifferent };

enum class Dominance { XDominates, YDominates, Cross, Equal };

// tau-th quantile of the lottery: the smallest outcome whose cumulative
// probability reaches tau.  tau = 0 returns the support minimum and tau = 1
// the support maximum, so the two extreme quantile maximizers coincide with
// the maxmin and maxmax rules.  tau outside [0, 1] is rejected.
double quantile(const Lottery& x, double tau);

double expected_utility(const Lottery& x, const UtilityFn& u);

// sum_i w(p_i) u(x_i); the distorted "probabilities" need not sum to 1.
double weighted_utility(const Lottery& x, const UtilityFn& u, const WeightFn& w);

// Ranks x against y by the tau-th quantile; equal quantiles (within 1e-12)
// give Indifferent.
Preference prefers_tau(const Lottery& x, const Lottery& y, double tau);

// Extreme quantile maximizers, i.e. prefers_tau at tau = 0 and tau = 1.
Preference maxmin_choice(const Lottery& x, const Lottery& y);
Preference maxmax_choice(const Lottery& x, const Lottery& y);

// First-order stochastic dominance verdict from the pointwise CDF order on
// the merged support.  "XDominates" means F_x <= F_y everywhere with strict
// inequality somewhere; CDFs equal within tol everywhere give Equal; sign
// changes give Cross.
Dominance fosd(const Lottery& x, const Lottery& y, double tol = 1e-12);

// True when y is a mean-preserving spread of x: equal means (within 1e-9)
// and the running integral of F_y - F_x over the merged support grid stays
// non-negative, vanishing at the top.
bool is_mean_preserving_spread(const Lottery& y, const Lottery& x);

} // namespace qmig
