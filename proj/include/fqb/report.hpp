#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fqb/bias_analysis.hpp"
#include "fqb/verification.hpp"

namespace fqb {

struct ReportOptions {
    std::vector<std::string> attributes;  // empty = every attribute column of the dataset
    std::vector<double> fmr_targets{0.001, 0.01};
    std::vector<double> reject_grid = default_reject_grid();
    std::size_t proportion_points = 100;
    std::size_t bins = 50;
    ThresholdMode threshold_mode = ThresholdMode::global;
    bool rederive_erc_threshold = false;
};

struct AttributeReport {
    VerificationReport verification;
    std::vector<ErrorRejectCurve> erc;  // one per FMR target
    ProportionCurve proportions;
    DistributionSummary distributions;
};

struct EstimatorReport {
    std::string estimator;
    std::vector<std::pair<std::string, AttributeReport>> attributes;
};

struct ReportBundle {
    std::vector<EstimatorReport> estimators;
};

/// Runs the subgroup table and the three quality/bias analyses for every
/// (estimator, attribute) combination.
ReportBundle bias_report(const Dataset& dataset, const ComparisonSet& scored,
                         const std::vector<QualityScores>& quality_sets, const ReportOptions& options);

/// "erc_fmr0.001.csv" for target 0.001 (shortest round-trip decimal).
std::string erc_file_name(double fmr_target);

/// Writes <out>/<estimator>/<attribute>/{fnmr_table.csv, erc_fmr<t>.csv per
/// target, proportions.csv, distributions.csv, summary.json}.
void write_report(const ReportBundle& bundle, const std::filesystem::path& out_dir);

// Individual emitters, shared with the single-analysis CLI subcommands.
void write_erc_csv(std::ostream& out, const ErrorRejectCurve& curve);
void write_proportions_csv(std::ostream& out, const ProportionCurve& curve);
void write_distributions_csv(std::ostream& out, const DistributionSummary& summary);
nlohmann::ordered_json summary_json(const std::string& estimator, const std::string& attribute,
                                    const AttributeReport& report);

/// Name usable as a single path component: [A-Za-z0-9._-]+, not "." or "..".
bool is_safe_name(const std::string& name);

}  // namespace fqb
