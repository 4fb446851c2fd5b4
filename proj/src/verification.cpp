#include "fqb/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "fqb/csv.hpp"
#include "fqb/error.hpp"
#include "fqb/parallel.hpp"

namespace fqb {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument(fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double x = a[k], y = b[k];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (!std::isfinite(dot + na + nb)) throw InvalidArgument("non-finite embedding entry");
    if (na == 0.0 || nb == 0.0) throw InvalidArgument("zero-norm embedding");
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

ComparisonSet score_pairs(const Dataset& dataset, ComparisonSet pairs) {
    const auto& emb = dataset.embeddings;
    auto check = [&](const std::vector<IndexPair>& list) {
        for (const auto& p : list) {
            if (p.probe >= emb.rows() || p.reference >= emb.rows()) {
                throw InvalidArgument(fmt::format("pair ({}, {}) out of range for {} images", p.probe,
                                                  p.reference, emb.rows()));
            }
        }
    };
    check(pairs.genuine_pairs);
    check(pairs.impostor_pairs);
    auto fill = [&](const std::vector<IndexPair>& list, std::vector<float>& scores) {
        scores.assign(list.size(), 0.0f);
        parallel_for(list.size(), [&](std::size_t k) {
            scores[k] = static_cast<float>(cosine_similarity(emb.row(list[k].probe), emb.row(list[k].reference)));
        });
    };
    fill(pairs.genuine_pairs, pairs.genuine_scores);
    fill(pairs.impostor_pairs, pairs.impostor_scores);
    return pairs;
}

ThresholdResult threshold_at_fmr(std::span<const float> impostor_scores, double target_fmr) {
    if (!(target_fmr > 0.0 && target_fmr < 1.0)) {
        throw InvalidArgument(fmt::format("target FMR {} outside (0, 1)", target_fmr));
    }
    if (impostor_scores.empty()) throw InvalidArgument("no impostor scores");
    const auto needed = static_cast<std::size_t>(std::ceil(1.0 / target_fmr - 1e-9));
    if (impostor_scores.size() < needed) {
        throw InvalidArgument(fmt::format("target FMR {} needs at least {} impostor scores, got {}", target_fmr,
                                          needed, impostor_scores.size()));
    }
    std::vector<float> sorted(impostor_scores.begin(), impostor_scores.end());
    for (float s : sorted) {
        if (!std::isfinite(s)) throw InvalidArgument("non-finite impostor score");
    }
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // Walk distinct values upward; at the first index k of a value, N - k
    // impostors score >= that value.
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (k > 0 && sorted[k] == sorted[k - 1]) continue;
        const double fmr = static_cast<double>(sorted.size() - k) / n;
        if (fmr <= target_fmr) return {sorted[k], fmr};
    }
    return {std::nextafter(sorted.back(), std::numeric_limits<float>::infinity()), 0.0};
}

double fnmr_at_threshold(std::span<const float> genuine_scores, float threshold) {
    if (genuine_scores.empty()) throw InvalidArgument("no genuine scores");
    const auto rejected = std::count_if(genuine_scores.begin(), genuine_scores.end(),
                                        [threshold](float s) { return s < threshold; });
    return static_cast<double>(rejected) / static_cast<double>(genuine_scores.size());
}

VerificationReport subgroup_fnmr_table(const Dataset& dataset, const ComparisonSet& scored,
                                       const std::string& attribute, const std::vector<double>& fmr_targets,
                                       ThresholdMode mode) {
    if (!scored.scored()) throw InvalidArgument("comparison set is not scored");
    if (fmr_targets.empty()) throw InvalidArgument("no FMR targets");
    std::vector<const std::string*> labels(dataset.size());
    std::set<std::string> distinct;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        labels[i] = dataset.records[i].attribute(attribute);
        if (!labels[i]) {
            throw DataError(fmt::format("attribute '{}' missing for image '{}'", attribute,
                                        dataset.records[i].image_id));
        }
        distinct.insert(*labels[i]);
    }

    VerificationReport report;
    report.attribute = attribute;
    report.fmr_targets = fmr_targets;
    report.mode = mode;
    for (double t : fmr_targets) report.global_thresholds[t] = threshold_at_fmr(scored.impostor_scores, t);

    auto pure_label = [&](const IndexPair& p) -> const std::string* {
        return *labels[p.probe] == *labels[p.reference] ? labels[p.probe] : nullptr;
    };

    for (const auto& label : distinct) {
        std::vector<float> genuine, impostor;
        for (std::size_t k = 0; k < scored.genuine_pairs.size(); ++k) {
            const auto* l = pure_label(scored.genuine_pairs[k]);
            if (l && *l == label) genuine.push_back(scored.genuine_scores[k]);
        }
        for (std::size_t k = 0; k < scored.impostor_pairs.size(); ++k) {
            const auto* l = pure_label(scored.impostor_pairs[k]);
            if (l && *l == label) impostor.push_back(scored.impostor_scores[k]);
        }
        SubgroupRow row;
        row.label = label;
        row.genuine_count = genuine.size();
        row.impostor_count = impostor.size();
        for (double t : fmr_targets) {
            std::optional<float> threshold;
            if (mode == ThresholdMode::global) {
                threshold = report.global_thresholds.at(t).threshold;
            } else if (!impostor.empty() &&
                       impostor.size() >= static_cast<std::size_t>(std::ceil(1.0 / t - 1e-9))) {
                threshold = threshold_at_fmr(impostor, t).threshold;
            }
            row.thresholds[t] = threshold;
            row.fnmr_at_fmr[t] = (threshold && !genuine.empty())
                                     ? std::optional<double>(fnmr_at_threshold(genuine, *threshold))
                                     : std::nullopt;
        }
        report.rows.push_back(std::move(row));
    }

    SubgroupRow all;
    all.label = kAllLabel;
    all.genuine_count = scored.genuine_scores.size();
    all.impostor_count = scored.impostor_scores.size();
    for (double t : fmr_targets) {
        const float threshold = report.global_thresholds.at(t).threshold;
        all.thresholds[t] = threshold;
        all.fnmr_at_fmr[t] = scored.genuine_scores.empty()
                                 ? std::nullopt
                                 : std::optional<double>(fnmr_at_threshold(scored.genuine_scores, threshold));
    }
    report.rows.push_back(std::move(all));
    return report;
}

std::string render_table_row(const SubgroupRow& row, const std::vector<double>& fmr_targets) {
    std::string out = row.label;
    for (double t : fmr_targets) {
        auto it = row.fnmr_at_fmr.find(t);
        out += " & ";
        if (it == row.fnmr_at_fmr.end() || !it->second) {
            out += "--";
        } else {
            out += fmt::format("{:.2f}%", *it->second * 100.0);
        }
    }
    return out;
}

std::string render_table(const VerificationReport& report) {
    std::ostringstream out;
    out << "Classes";
    for (double t : report.fmr_targets) out << " & " << csv::format_double(t * 100.0) << "%FMR";
    out << " \\\\\n";
    for (const auto& row : report.rows) out << render_table_row(row, report.fmr_targets) << " \\\\\n";
    return out.str();
}

void write_report_csv(std::ostream& out, const VerificationReport& report) {
    csv::write_row(out, {"attribute", "label", "fmr_target", "threshold", "fnmr", "genuine_count", "impostor_count"});
    for (const auto& row : report.rows) {
        for (double t : report.fmr_targets) {
            const auto& threshold = row.thresholds.at(t);
            const auto& fnmr = row.fnmr_at_fmr.at(t);
            csv::write_row(out, {report.attribute, row.label, csv::format_double(t),
                                 threshold ? csv::format_float(*threshold) : "NA",
                                 fnmr ? csv::format_double(*fnmr) : "NA", std::to_string(row.genuine_count),
                                 std::to_string(row.impostor_count)});
        }
    }
}

nlohmann::ordered_json to_json(const VerificationReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["attribute"] = report.attribute;
    j["threshold_mode"] = report.mode == ThresholdMode::global ? "global" : "per_subgroup";
    j["match_rule"] = "score >= threshold";
    ordered_json thresholds = ordered_json::array();
    for (double t : report.fmr_targets) {
        const auto& g = report.global_thresholds.at(t);
        thresholds.push_back({{"fmr_target", t}, {"threshold", g.threshold}, {"achieved_fmr", g.achieved_fmr}});
    }
    j["global_thresholds"] = std::move(thresholds);
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r;
        r["label"] = row.label;
        r["genuine_count"] = row.genuine_count;
        r["impostor_count"] = row.impostor_count;
        ordered_json rates = ordered_json::array();
        for (double t : report.fmr_targets) {
            const auto& threshold = row.thresholds.at(t);
            const auto& fnmr = row.fnmr_at_fmr.at(t);
            rates.push_back({{"fmr_target", t},
                             {"threshold", threshold ? ordered_json(*threshold) : ordered_json(nullptr)},
                             {"fnmr", fnmr ? ordered_json(*fnmr) : ordered_json(nullptr)}});
        }
        r["rates"] = std::move(rates);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

}  // namespace fqb
