#include "qmig/lottery.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qmig/csv.hpp"

namespace qmig {

namespace {
constexpr double kProbSumTol = 1e-9;  // renormalization window around 1
constexpr double kTieTol = 1e-12;     // quantile/CDF comparison tolerance
} // namespace

Lottery::Lottery(std::vector<Outcome> atoms) {
    if (atoms.empty()) {
        throw std::invalid_argument("lottery needs at least one outcome");
    }
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.value) || !std::isfinite(a.probability)) {
            throw std::invalid_argument("lottery atoms must be finite");
        }
        if (a.probability < 0.0) {
            throw std::invalid_argument("negative probability in lottery");
        }
        total += a.probability;
    }
    if (std::fabs(total - 1.0) > kProbSumTol) {
        throw std::invalid_argument("lottery probabilities sum to " +
                                    csv::format_double(total) + ", not 1");
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
    // Merge duplicate outcome values and drop zero-probability atoms.
    for (const auto& a : atoms) {
        if (a.probability == 0.0) continue;
        if (!atoms_.empty() && atoms_.back().value == a.value) {
            atoms_.back().probability += a.probability;
        } else {
            atoms_.push_back(a);
        }
    }
    if (atoms_.empty()) {
        throw std::invalid_argument("lottery has no positive-probability outcome");
    }
    double cum = 0.0;
    cum_.reserve(atoms_.size());
    for (auto& a : atoms_) {
        a.probability /= total;
        cum += a.probability;
        cum_.push_back(cum);
    }
    cum_.back() = 1.0; // guard against accumulated rounding at the top
}

Lottery Lottery::uniform(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("lottery needs at least one outcome");
    }
    std::vector<Outcome> atoms;
    atoms.reserve(values.size());
    double p = 1.0 / static_cast<double>(values.size());
    for (double v : values) atoms.push_back({v, p});
    return Lottery(std::move(atoms));
}

double Lottery::mean() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.value * a.probability;
    return m;
}

double Lottery::cdf_at(double v) const {
    // Last atom with value <= v.
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), v,
                               [](double lhs, const Outcome& rhs) { return lhs < rhs.value; });
    if (it == atoms_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
}

Lottery Lottery::map_outcomes(const std::function<double(double)>& f) const {
    std::vector<Outcome> atoms;
    atoms.reserve(atoms_.size());
    for (const auto& a : atoms_) atoms.push_back({f(a.value), a.probability});
    return Lottery(std::move(atoms));
}

Lottery Lottery::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("lottery csv: empty input");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "value,probability") {
        throw std::runtime_error("lottery csv: expected header 'value,probability'");
    }
    std::vector<Outcome> atoms;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = csv::split_line(line);
        if (fields.size() != 2) {
            throw std::runtime_error("lottery csv: expected two fields, got '" + line + "'");
        }
        atoms.push_back({csv::parse_double(fields[0]), csv::parse_double(fields[1])});
    }
    return Lottery(std::move(atoms));
}

void Lottery::write_csv(std::ostream& out) const {
    out << "value,probability\n";
    for (const auto& a : atoms_) {
        out << csv::format_double(a.value) << ',' << csv::format_double(a.probability)
            << '\n';
    }
}

WeightFn::WeightFn(std::function<double(double)> w) : w_(std::move(w)) {
    if (!w_) throw std::invalid_argument("weight function is empty");
    if (std::fabs(w_(0.0)) > kTieTol || std::fabs(w_(1.0) - 1.0) > kTieTol) {
        throw std::invalid_argument("weight function must satisfy w(0)=0 and w(1)=1");
    }
}

bool check_increasing(const std::function<double(double)>& f, double lo, double hi,
                      int points) {
    if (points < 2 || !(hi > lo)) {
        throw std::invalid_argument("check_increasing: need points >= 2 and hi > lo");
    }
    double prev = f(lo);
    for (int i = 1; i < points; ++i) {
        double t = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
        double cur = f(t);
        if (!(cur > prev)) return false;
        prev = cur;
    }
    return true;
}

double quantile(const Lottery& x, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("quantile level must lie in [0, 1]");
    }
    const auto& atoms = x.outcomes();
    if (tau == 0.0) return atoms.front().value;
    const auto& cum = x.cumulative();
    // Smallest outcome whose cumulative probability reaches tau; the small
    // tolerance keeps exact rational levels (e.g. 0.75 on quarter masses)
    // from being missed through floating point accumulation.
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (cum[i] >= tau - kTieTol) return atoms[i].value;
    }
    return atoms.back().value; // unreachable: cum.back() == 1
}

double expected_utility(const Lottery& x, const UtilityFn& u) {
    double total = 0.0;
    for (const auto& a : x.outcomes()) total += a.probability * u(a.value);
    return total;
}

double weighted_utility(const Lottery& x, const UtilityFn& u, const WeightFn& w) {
    double total = 0.0;
    for (const auto& a : x.outcomes()) total += w(a.probability) * u(a.value);
    return total;
}

Preference prefers_tau(const Lottery& x, const Lottery& y, double tau) {
    double qx = quantile(x, tau);
    double qy = quantile(y, tau);
    if (std::fabs(qx - qy) <= kTieTol) return Preference::Indifferent;
    return qx > qy ? Preference::First : Preference::Second;
}

Preference maxmin_choice(const Lottery& x, const Lottery& y) {
    return prefers_tau(x, y, 0.0);
}

Preference maxmax_choice(const Lottery& x, const Lottery& y) {
    return prefers_tau(x, y, 1.0);
}

namespace {

std::vector<double> merged_support(const Lottery& x, const Lottery& y) {
    std::vector<double> grid;
    grid.reserve(x.size() + y.size());
    for (const auto& a : x.outcomes()) grid.push_back(a.value);
    for (const auto& a : y.outcomes()) grid.push_back(a.value);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

} // namespace

Dominance fosd(const Lottery& x, const Lottery& y, double tol) {
    bool x_below = false; // F_x < F_y somewhere (x puts less mass on low values)
    bool y_below = false;
    for (double v : merged_support(x, y)) {
        double d = x.cdf_at(v) - y.cdf_at(v);
        if (d < -tol) x_below = true;
        else if (d > tol) y_below = true;
    }
    if (x_below && y_below) return Dominance::Cross;
    if (x_below) return Dominance::XDominates;
    if (y_below) return Dominance::YDominates;
    return Dominance::Equal;
}

bool is_mean_preserving_spread(const Lottery& y, const Lottery& x) {
    constexpr double tol = 1e-9;
    if (std::fabs(y.mean() - x.mean()) > tol) return false;
    // Rothschild-Stiglitz integral condition on the merged support grid:
    // the running integral of F_y - F_x must stay non-negative and return
    // to zero at the top of the support.
    auto grid = merged_support(x, y);
    double integral = 0.0;
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        integral += (y.cdf_at(grid[j]) - x.cdf_at(grid[j])) * (grid[j + 1] - grid[j]);
        if (integral < -tol) return false;
    }
    return std::fabs(integral) <= tol;
}

} // namespace qmig
