#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fqb/dataset.hpp"
#include "fqb/verification.hpp"

namespace fqb {

// ---------------------------------------------------------------------------
// Error versus reject
// ---------------------------------------------------------------------------

struct ErcPoint {
    double reject_ratio = 0.0;
    std::optional<double> fnmr;  // nullopt when no genuine pair remains
    std::size_t remaining_genuine = 0;
    float threshold = 0.0f;      // threshold used at this point
};

struct ErrorRejectCurve {
    double fmr_target = 0.0;
    float threshold = 0.0f;  // from the full impostor set
    bool rederived = false;
    std::vector<ErcPoint> points;
};

struct ErcOptions {
    /// Recompute the threshold on the surviving impostor pairs at each point.
    bool rederive_threshold = false;
};

/// k/100 for k = 0..50.
std::vector<double> default_reject_grid();

/// Number of images discarded at ratio r for n images: ceil(r*n), computed
/// with a 1e-9 slack so ratios like 0.07 are not pushed up by rounding.
std::size_t rejected_count(double reject_ratio, std::size_t n);

/// Image indices ordered lowest quality first, ties by ascending index.
std::vector<std::size_t> rejection_order(const QualityScores& quality);

/// For each ratio r, drop the ceil(r*N) lowest-quality images and every pair
/// touching them, then evaluate FNMR on the surviving genuine pairs. The
/// grid is sorted and a 0 point is added when missing.
ErrorRejectCurve error_vs_reject(const ComparisonSet& scored, const QualityScores& quality, double fmr_target,
                                 std::vector<double> grid, const ErcOptions& options = {});

// ---------------------------------------------------------------------------
// Subgroup proportions over quality thresholds
// ---------------------------------------------------------------------------

struct ProportionPoint {
    double quantile = 0.0;
    double threshold = 0.0;
    std::size_t remaining_total = 0;
    std::map<std::string, double> fractions;
};

struct ProportionCurve {
    std::string attribute;
    std::vector<std::string> labels;
    std::map<std::string, double> base_rates;
    std::vector<ProportionPoint> points;
};

/// Thresholds are empirical quantiles of the pooled quality: the quantile at
/// level k/num_points is the sorted value at index floor(k*N/num_points).
/// Images with quality >= threshold remain.
ProportionCurve proportion_vs_threshold(const Dataset& dataset, const QualityScores& quality,
                                        const std::string& attribute, std::size_t num_points = 100);

// ---------------------------------------------------------------------------
// Quality distributions
// ---------------------------------------------------------------------------

struct DistributionSummary {
    std::string attribute;
    std::vector<double> bin_edges;  // bins + 1 edges; 2 edges when the pooled range is degenerate
    std::map<std::string, std::vector<double>> histograms;  // probability mass per bin
    std::map<std::pair<std::string, std::string>, double> overlap;  // both orders stored
    std::map<std::string, double> medians;
};

/// Sum over bins of min(a, b).
double overlap_coefficient(std::span<const double> a, std::span<const double> b);

DistributionSummary quality_distributions(const Dataset& dataset, const QualityScores& quality,
                                          const std::string& attribute, std::size_t bins = 50);

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

/// Median of the values (mean of the middle two for even counts).
double median(std::vector<double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

/// Labels of `attribute` per image; throws DataError when any image lacks it.
std::vector<std::string> attribute_labels(const Dataset& dataset, const std::string& attribute);

}  // namespace fqb
