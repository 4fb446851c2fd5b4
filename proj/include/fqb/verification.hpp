#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fqb/dataset.hpp"

namespace fqb {

// Match rule throughout: a comparison is a match when score >= threshold.

/// dot(a,b) / (|a| |b|), accumulated in double and clamped to [-1, 1].
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Fills the score vectors of `pairs` from the dataset embeddings, preserving
/// pair order. Throws InvalidArgument on an out-of-range index.
ComparisonSet score_pairs(const Dataset& dataset, ComparisonSet pairs);

struct ThresholdResult {
    float threshold = 0.0f;
    double achieved_fmr = 0.0;
};

/// Smallest threshold among the distinct impostor scores (or the float just
/// above the maximum) whose false match rate does not exceed `target_fmr`.
/// Requires at least ceil(1/target_fmr) scores.
ThresholdResult threshold_at_fmr(std::span<const float> impostor_scores, double target_fmr);

/// Fraction of genuine scores strictly below `threshold`.
double fnmr_at_threshold(std::span<const float> genuine_scores, float threshold);

enum class ThresholdMode {
    global,        ///< one threshold from all impostor scores
    per_subgroup,  ///< threshold from impostor pairs inside the subgroup
};

inline constexpr const char* kAllLabel = "All";

struct SubgroupRow {
    std::string label;
    /// nullopt marks an undefined rate (no genuine pairs, or no resolvable threshold).
    std::map<double, std::optional<double>> fnmr_at_fmr;
    std::map<double, std::optional<float>> thresholds;
    std::size_t genuine_count = 0;
    std::size_t impostor_count = 0;
};

/// One row per attribute label (sorted), then the aggregate "All" row.
struct VerificationReport {
    std::string attribute;
    std::vector<double> fmr_targets;
    ThresholdMode mode = ThresholdMode::global;
    std::map<double, ThresholdResult> global_thresholds;
    std::vector<SubgroupRow> rows;
};

/// Subgroup rows count only pairs whose two images share the label; pairs
/// with mixed labels contribute to "All" only. Throws DataError when any
/// image lacks the attribute.
VerificationReport subgroup_fnmr_table(const Dataset& dataset, const ComparisonSet& scored,
                                       const std::string& attribute, const std::vector<double>& fmr_targets,
                                       ThresholdMode mode = ThresholdMode::global);

/// Table-style row: "Frontal & 0.40% & 0.00%" (one percentage per target,
/// two decimals, "--" for undefined).
std::string render_table_row(const SubgroupRow& row, const std::vector<double>& fmr_targets);
std::string render_table(const VerificationReport& report);

/// CSV columns: attribute,label,fmr_target,threshold,fnmr,genuine_count,impostor_count
/// (undefined values written as NA).
void write_report_csv(std::ostream& out, const VerificationReport& report);
nlohmann::ordered_json to_json(const VerificationReport& report);

}  // namespace fqb
