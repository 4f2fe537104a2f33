#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// Weighted empirical distributions and two-sample CDF comparison.  The
// comparison reports where one distribution's CDF sits below the other's
// (dominance), where the two curves cross, and — optionally — pointwise
// bootstrap confidence bands for the CDF difference.

namespace qmig {

struct WeightedPoint {
    double value = 0.0;
    double weight = 1.0;
};

// Right-continuous weighted empirical CDF.  Construction sorts the sample,
// merges ties, and normalizes cumulative weights to end at 1.  The original
// sample is retained for bootstrap resampling.
class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<WeightedPoint> sample);

    static EmpiricalDistribution from_values(const std::vector<double>& values);

    double cdf(double v) const;

    // Generalized inverse: smallest support value with CDF >= q.
    double quantile(double q) const;

    const std::vector<double>& support() const { return values_; }
    const std::vector<WeightedPoint>& sample() const { return sample_; }
    std::size_t sample_size() const { return sample_.size(); }
    double total_weight() const { return total_weight_; }

private:
    std::vector<WeightedPoint> sample_; // as given (bootstrap population)
    std::vector<double> values_;        // ascending unique support
    std::vector<double> cum_;           // normalized cumulative weights
    double total_weight_ = 0.0;
};

enum class CdfVerdict { ADominates, BDominates, Cross, Equal };

std::string to_string(CdfVerdict v);

// Result of comparing two empirical CDFs.  diff[i] = F_a(grid[i]) - F_b(grid[i]).
// Negative diff means a's CDF lies below (a dominates at that point).
struct DominanceReport {
    std::vector<double> grid;      // strictly increasing evaluation points
    std::vector<double> diff;      // F_a - F_b on the grid
    std::vector<double> crossings; // midpoints of sign-change brackets
    CdfVerdict verdict = CdfVerdict::Equal;
    bool has_bands = false;
    std::vector<double> band_lo;   // pointwise lower band for diff
    std::vector<double> band_hi;   // pointwise upper band for diff

    // CSV: "# verdict=... crossings=..." comment line, then
    // grid_value,diff,band_lo,band_hi rows (band fields empty without bands).
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
};

// Compares two weighted empirical CDFs.  The report grid is the merged
// support, thinned when necessary to at most grid_size points spaced evenly
// in pooled quantile terms.  diff, the crossing list, and the verdict are
// all evaluated on that grid (sign tolerance 1e-12): a crossing is reported
// at the midpoint of the grid interval over which diff changes sign.  When
// the merged support fits within grid_size the comparison is exact; a
// thinned grid also damps the one-observation wiggle two step functions
// exhibit around a genuine crossing.  grid_size must be >= 2 and is capped
// at 512.
DominanceReport compare_cdfs(const EmpiricalDistribution& a,
                             const EmpiricalDistribution& b,
                             std::size_t grid_size = 512);

// compare_cdfs plus pointwise bootstrap percentile bands for the CDF
// difference.  Each replicate resamples both samples with replacement,
// probability proportional to weight; replicate r uses an engine seeded
// from (seed, r) so the band is reproducible and independent of evaluation
// order.  replicates must be >= 100; level is the two-sided coverage (e.g.
// 0.95).
DominanceReport dominance_bands(const EmpiricalDistribution& a,
                                const EmpiricalDistribution& b,
                                std::size_t replicates, double level,
                                std::uint64_t seed, std::size_t grid_size = 512);

} // namespace qmig
