#include "fqb/bias_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "fqb/error.hpp"

namespace fqb {

std::vector<std::string> attribute_labels(const Dataset& dataset, const std::string& attribute) {
    std::vector<std::string> labels;
    labels.reserve(dataset.size());
    for (const auto& rec : dataset.records) {
        const std::string* label = rec.attribute(attribute);
        if (!label) {
            throw DataError(fmt::format("attribute '{}' missing for image '{}'", attribute, rec.image_id));
        }
        labels.push_back(*label);
    }
    return labels;
}

namespace {

void check_quality(const QualityScores& quality, std::size_t expected) {
    if (quality.values.size() != expected) {
        throw InvalidArgument(fmt::format("quality '{}' has {} values for {} images", quality.estimator_name,
                                          quality.values.size(), expected));
    }
    for (double q : quality.values) {
        if (!std::isfinite(q)) throw InvalidArgument(fmt::format("quality '{}' has a non-finite value",
                                                                 quality.estimator_name));
    }
}

}  // namespace

std::vector<double> default_reject_grid() {
    std::vector<double> grid;
    for (int k = 0; k <= 50; ++k) grid.push_back(k / 100.0);
    return grid;
}

std::size_t rejected_count(double reject_ratio, std::size_t n) {
    const double raw = reject_ratio * static_cast<double>(n);
    const auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
    return std::min(k, n);
}

std::vector<std::size_t> rejection_order(const QualityScores& quality) {
    std::vector<std::size_t> order(quality.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quality.values[a] < quality.values[b]; });
    return order;
}

ErrorRejectCurve error_vs_reject(const ComparisonSet& scored, const QualityScores& quality, double fmr_target,
                                 std::vector<double> grid, const ErcOptions& options) {
    if (grid.empty()) throw InvalidArgument("empty reject grid");
    if (!scored.scored()) throw InvalidArgument("comparison set is not scored");
    for (double r : grid) {
        if (!(r >= 0.0 && r < 1.0)) throw InvalidArgument(fmt::format("reject ratio {} outside [0, 1)", r));
    }
    const std::size_t n = quality.values.size();
    check_quality(quality, n);
    auto max_index = [](const std::vector<IndexPair>& pairs) {
        std::uint32_t m = 0;
        for (const auto& p : pairs) m = std::max({m, p.probe, p.reference});
        return m;
    };
    if (!scored.genuine_pairs.empty() || !scored.impostor_pairs.empty()) {
        const std::uint32_t top = std::max(max_index(scored.genuine_pairs), max_index(scored.impostor_pairs));
        if (top >= n) {
            throw InvalidArgument(fmt::format("quality length {} does not cover pair index {}", n, top));
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);

    ErrorRejectCurve curve;
    curve.fmr_target = fmr_target;
    curve.rederived = options.rederive_threshold;
    curve.threshold = threshold_at_fmr(scored.impostor_scores, fmr_target).threshold;

    const auto order = rejection_order(quality);
    std::vector<std::size_t> rank(n);
    for (std::size_t pos = 0; pos < n; ++pos) rank[order[pos]] = pos;

    for (double r : grid) {
        const std::size_t k = rejected_count(r, n);
        auto kept = [&](const IndexPair& p) { return rank[p.probe] >= k && rank[p.reference] >= k; };
        ErcPoint point;
        point.reject_ratio = r;
        point.threshold = curve.threshold;
        bool threshold_ok = true;
        if (options.rederive_threshold) {
            std::vector<float> impostors;
            for (std::size_t i = 0; i < scored.impostor_pairs.size(); ++i) {
                if (kept(scored.impostor_pairs[i])) impostors.push_back(scored.impostor_scores[i]);
            }
            const auto needed = static_cast<std::size_t>(std::ceil(1.0 / fmr_target - 1e-9));
            if (impostors.size() >= needed && !impostors.empty()) {
                point.threshold = threshold_at_fmr(impostors, fmr_target).threshold;
            } else {
                threshold_ok = false;
            }
        }
        std::size_t remaining = 0, rejected = 0;
        for (std::size_t i = 0; i < scored.genuine_pairs.size(); ++i) {
            if (!kept(scored.genuine_pairs[i])) continue;
            ++remaining;
            if (scored.genuine_scores[i] < point.threshold) ++rejected;
        }
        point.remaining_genuine = remaining;
        if (remaining > 0 && threshold_ok) {
            point.fnmr = static_cast<double>(rejected) / static_cast<double>(remaining);
        }
        curve.points.push_back(point);
    }
    return curve;
}

ProportionCurve proportion_vs_threshold(const Dataset& dataset, const QualityScores& quality,
                                        const std::string& attribute, std::size_t num_points) {
    if (num_points == 0) throw InvalidArgument("proportion curve needs at least one point");
    check_quality(quality, dataset.size());
    if (dataset.size() == 0) throw InvalidArgument("empty dataset");
    const auto labels = attribute_labels(dataset, attribute);

    ProportionCurve curve;
    curve.attribute = attribute;
    const std::set<std::string> distinct(labels.begin(), labels.end());
    curve.labels.assign(distinct.begin(), distinct.end());
    for (const auto& l : curve.labels) curve.base_rates[l] = 0.0;
    for (const auto& l : labels) curve.base_rates[l] += 1.0;
    for (auto& [l, v] : curve.base_rates) v /= static_cast<double>(labels.size());

    std::vector<double> sorted = quality.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    for (std::size_t k = 0; k < num_points; ++k) {
        ProportionPoint point;
        point.quantile = static_cast<double>(k) / static_cast<double>(num_points);
        point.threshold = sorted[(k * n) / num_points];
        std::map<std::string, std::size_t> counts;
        for (const auto& l : curve.labels) counts[l] = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (quality.values[i] >= point.threshold) {
                ++counts[labels[i]];
                ++point.remaining_total;
            }
        }
        for (const auto& [l, c] : counts) {
            point.fractions[l] = point.remaining_total == 0
                                     ? 0.0
                                     : static_cast<double>(c) / static_cast<double>(point.remaining_total);
        }
        curve.points.push_back(std::move(point));
    }
    return curve;
}

double overlap_coefficient(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("histograms have different bin counts");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::min(a[i], b[i]);
    return std::clamp(sum, 0.0, 1.0);
}

DistributionSummary quality_distributions(const Dataset& dataset, const QualityScores& quality,
                                          const std::string& attribute, std::size_t bins) {
    if (bins == 0) throw InvalidArgument("distribution needs at least one bin");
    check_quality(quality, dataset.size());
    if (dataset.size() == 0) throw InvalidArgument("empty dataset");
    const auto labels = attribute_labels(dataset, attribute);

    DistributionSummary summary;
    summary.attribute = attribute;
    const auto [lo_it, hi_it] = std::minmax_element(quality.values.begin(), quality.values.end());
    const double lo = *lo_it, hi = *hi_it;
    const std::size_t used_bins = hi > lo ? bins : 1;
    summary.bin_edges.resize(used_bins + 1);
    for (std::size_t b = 0; b <= used_bins; ++b) {
        summary.bin_edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(used_bins);
    }
    summary.bin_edges.back() = hi;

    std::map<std::string, std::vector<double>> values;
    for (std::size_t i = 0; i < labels.size(); ++i) values[labels[i]].push_back(quality.values[i]);
    for (const auto& [label, qs] : values) {
        std::vector<double> hist(used_bins, 0.0);
        for (double q : qs) {
            std::size_t b = 0;
            if (used_bins > 1) {
                const double pos = (q - lo) / (hi - lo) * static_cast<double>(used_bins);
                b = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), used_bins - 1);
            }
            hist[b] += 1.0;
        }
        for (double& h : hist) h /= static_cast<double>(qs.size());
        summary.histograms[label] = std::move(hist);
        summary.medians[label] = median(qs);
    }
    for (const auto& [a, ha] : summary.histograms) {
        for (const auto& [b, hb] : summary.histograms) {
            summary.overlap[{a, b}] = a == b ? 1.0 : overlap_coefficient(ha, hb);
        }
    }
    return summary;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("Spearman needs two equal-length samples, n >= 2");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("Spearman undefined for a constant sample");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace fqb
