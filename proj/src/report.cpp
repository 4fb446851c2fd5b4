#include "fqb/report.hpp"

#include <fstream>
#include <ostream>
#include <set>

#include <fmt/core.h>

#include "fqb/csv.hpp"
#include "fqb/error.hpp"

namespace fqb {

bool is_safe_name(const std::string& name) {
    if (name.empty() || name == "." || name == "..") return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

ReportBundle bias_report(const Dataset& dataset, const ComparisonSet& scored,
                         const std::vector<QualityScores>& quality_sets, const ReportOptions& options) {
    if (quality_sets.empty()) throw InvalidArgument("report needs at least one quality estimator");
    const auto attributes = options.attributes.empty() ? dataset.attribute_names : options.attributes;
    if (attributes.empty()) throw DataError("dataset has no attribute columns to stratify by");
    std::set<std::string> names;
    for (const auto& q : quality_sets) {
        if (!is_safe_name(q.estimator_name)) {
            throw InvalidArgument(fmt::format("estimator name '{}' is not a valid directory name", q.estimator_name));
        }
        if (!names.insert(q.estimator_name).second) {
            throw InvalidArgument(fmt::format("estimator '{}' given twice", q.estimator_name));
        }
    }
    for (const auto& a : attributes) {
        if (!is_safe_name(a)) throw InvalidArgument(fmt::format("attribute name '{}' is not a valid directory name", a));
    }

    // The verification table does not depend on the estimator.
    std::vector<VerificationReport> tables;
    for (const auto& a : attributes) {
        tables.push_back(subgroup_fnmr_table(dataset, scored, a, options.fmr_targets, options.threshold_mode));
    }

    ReportBundle bundle;
    for (const auto& quality : quality_sets) {
        EstimatorReport est;
        est.estimator = quality.estimator_name;
        for (std::size_t ai = 0; ai < attributes.size(); ++ai) {
            AttributeReport rep;
            rep.verification = tables[ai];
            for (double t : options.fmr_targets) {
                rep.erc.push_back(error_vs_reject(scored, quality, t, options.reject_grid,
                                                  ErcOptions{options.rederive_erc_threshold}));
            }
            rep.proportions = proportion_vs_threshold(dataset, quality, attributes[ai], options.proportion_points);
            rep.distributions = quality_distributions(dataset, quality, attributes[ai], options.bins);
            est.attributes.emplace_back(attributes[ai], std::move(rep));
        }
        bundle.estimators.push_back(std::move(est));
    }
    return bundle;
}

std::string erc_file_name(double fmr_target) { return "erc_fmr" + csv::format_double(fmr_target) + ".csv"; }

void write_erc_csv(std::ostream& out, const ErrorRejectCurve& curve) {
    csv::write_row(out, {"reject_ratio", "fnmr", "remaining_genuine"});
    for (const auto& p : curve.points) {
        csv::write_row(out, {csv::format_double(p.reject_ratio), p.fnmr ? csv::format_double(*p.fnmr) : "NA",
                             std::to_string(p.remaining_genuine)});
    }
}

void write_proportions_csv(std::ostream& out, const ProportionCurve& curve) {
    csv::write_row(out, {"threshold_quantile", "threshold_value", "label", "fraction", "remaining_total"});
    for (const auto& p : curve.points) {
        for (const auto& label : curve.labels) {
            csv::write_row(out, {csv::format_double(p.quantile), csv::format_double(p.threshold), label,
                                 csv::format_double(p.fractions.at(label)), std::to_string(p.remaining_total)});
        }
    }
}

void write_distributions_csv(std::ostream& out, const DistributionSummary& summary) {
    csv::write_row(out, {"label", "bin", "bin_low", "bin_high", "mass"});
    for (const auto& [label, hist] : summary.histograms) {
        for (std::size_t b = 0; b < hist.size(); ++b) {
            csv::write_row(out, {label, std::to_string(b), csv::format_double(summary.bin_edges[b]),
                                 csv::format_double(summary.bin_edges[b + 1]), csv::format_double(hist[b])});
        }
    }
}

nlohmann::ordered_json summary_json(const std::string& estimator, const std::string& attribute,
                                    const AttributeReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["estimator"] = estimator;
    j["attribute"] = attribute;
    j["verification"] = to_json(report.verification);

    ordered_json erc = ordered_json::array();
    for (const auto& curve : report.erc) {
        ordered_json c;
        c["fmr_target"] = curve.fmr_target;
        c["threshold"] = curve.threshold;
        c["threshold_rederived"] = curve.rederived;
        c["file"] = erc_file_name(curve.fmr_target);
        const auto& first = curve.points.front();
        const auto& last = curve.points.back();
        c["fnmr_at_0"] = first.fnmr ? ordered_json(*first.fnmr) : ordered_json(nullptr);
        c["max_reject_ratio"] = last.reject_ratio;
        c["fnmr_at_max_reject"] = last.fnmr ? ordered_json(*last.fnmr) : ordered_json(nullptr);
        erc.push_back(std::move(c));
    }
    j["erc"] = std::move(erc);

    // Retention at the median-quality threshold: the quantile-0.5 point when the grid has one.
    const ProportionPoint* at_median = nullptr;
    for (const auto& p : report.proportions.points) {
        if (p.quantile == 0.5) at_median = &p;
    }
    ordered_json groups = ordered_json::array();
    for (const auto& label : report.proportions.labels) {
        ordered_json g;
        g["label"] = label;
        g["base_rate"] = report.proportions.base_rates.at(label);
        g["median_quality"] = report.distributions.medians.at(label);
        g["fraction_at_median_threshold"] =
            at_median ? ordered_json(at_median->fractions.at(label)) : ordered_json(nullptr);
        groups.push_back(std::move(g));
    }
    j["subgroups"] = std::move(groups);

    ordered_json overlaps = ordered_json::array();
    for (const auto& [key, value] : report.distributions.overlap) {
        if (key.first < key.second) overlaps.push_back({{"a", key.first}, {"b", key.second}, {"overlap", value}});
    }
    j["distribution_overlap"] = std::move(overlaps);
    j["files"] = {"fnmr_table.csv", "proportions.csv", "distributions.csv"};
    return j;
}

namespace {

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    writer(out);
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace

void write_report(const ReportBundle& bundle, const std::filesystem::path& out_dir) {
    for (const auto& est : bundle.estimators) {
        for (const auto& [attribute, rep] : est.attributes) {
            const auto dir = out_dir / est.estimator / attribute;
            std::filesystem::create_directories(dir);
            write_file(dir / "fnmr_table.csv", [&](std::ostream& o) { write_report_csv(o, rep.verification); });
            for (const auto& curve : rep.erc) {
                write_file(dir / erc_file_name(curve.fmr_target), [&](std::ostream& o) { write_erc_csv(o, curve); });
            }
            write_file(dir / "proportions.csv", [&](std::ostream& o) { write_proportions_csv(o, rep.proportions); });
            write_file(dir / "distributions.csv",
                       [&](std::ostream& o) { write_distributions_csv(o, rep.distributions); });
            write_file(dir / "summary.json",
                       [&](std::ostream& o) { o << summary_json(est.estimator, attribute, rep).dump(2) << '\n'; });
        }
    }
}

}  // namespace fqb
