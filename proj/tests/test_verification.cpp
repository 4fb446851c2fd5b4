#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fqb/dataset_io.hpp"
#include "fqb/error.hpp"
#include "fqb/rng.hpp"
#include "fqb/synthetic.hpp"
#include "fqb/verification.hpp"
#include "support.hpp"

using namespace fqb;

TEST_CASE("cosine_similarity examples") {
    const std::vector<float> e1{1, 0, 0};
    CHECK(cosine_similarity(e1, e1) == 1.0);
    CHECK(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == 0.0);
    CHECK(cosine_similarity(std::vector<float>{0.6f, 0.8f}, std::vector<float>{1, 0}) ==
          doctest::Approx(0.6).epsilon(1e-7));
    CHECK(cosine_similarity(std::vector<float>{3, 4}, std::vector<float>{-6, -8}) == -1.0);
    CHECK_THROWS_AS(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{1}), InvalidArgument);
    CHECK_THROWS_AS(cosine_similarity(std::vector<float>{0, 0}, std::vector<float>{1, 0}), InvalidArgument);
}

TEST_CASE("score_pairs matches a naive pairwise loop") {
    SplitMix64 rng(11);
    std::vector<std::pair<std::string, std::string>> sl;
    std::vector<std::vector<float>> rows;
    for (int i = 0; i < 10; ++i) {
        std::vector<float> r(6);
        for (float& v : r) v = static_cast<float>(rng.gaussian());
        rows.push_back(r);
        sl.emplace_back("s" + std::to_string(i / 2), "g");
    }
    Dataset ds = fqb::test::make_dataset(sl, rows);
    normalize_rows(ds.embeddings);

    ComparisonSet all;
    for (std::uint32_t i = 0; i < 10; ++i) {
        for (std::uint32_t j = i + 1; j < 10; ++j) {
            (i / 2 == j / 2 ? all.genuine_pairs : all.impostor_pairs).push_back({i, j});
        }
    }
    const ComparisonSet scored = score_pairs(ds, all);
    REQUIRE(scored.scored());
    CHECK(scored.genuine_pairs == all.genuine_pairs);
    auto naive = [&](std::uint32_t a, std::uint32_t b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t k = 0; k < 6; ++k) {
            dot += rows[a][k] * static_cast<double>(rows[b][k]);
            na += rows[a][k] * static_cast<double>(rows[a][k]);
            nb += rows[b][k] * static_cast<double>(rows[b][k]);
        }
        return dot / std::sqrt(na) / std::sqrt(nb);
    };
    for (std::size_t k = 0; k < all.impostor_pairs.size(); ++k) {
        const auto p = all.impostor_pairs[k];
        CHECK(std::abs(scored.impostor_scores[k] - naive(p.probe, p.reference)) < 1e-6);
    }
    for (std::size_t k = 0; k < all.genuine_pairs.size(); ++k) {
        const auto p = all.genuine_pairs[k];
        CHECK(std::abs(scored.genuine_scores[k] - naive(p.probe, p.reference)) < 1e-6);
    }
}

TEST_CASE("score_pairs edge cases") {
    Dataset ds = fqb::test::make_dataset({{"a", "g"}, {"a", "g"}, {"b", "g"}}, {{0.6f, 0.8f}, {0.6f, 0.8f}, {1, 0}});
    ComparisonSet one;
    one.genuine_pairs = {{0, 1}};
    CHECK(score_pairs(ds, one).genuine_scores == std::vector<float>{1.0f});

    const ComparisonSet empty = score_pairs(ds, {});
    CHECK(empty.genuine_scores.empty());
    CHECK(empty.impostor_scores.empty());
    CHECK(empty.scored());

    ComparisonSet bad;
    bad.impostor_pairs = {{0, 7}};
    CHECK_THROWS_AS(score_pairs(ds, bad), InvalidArgument);
}

TEST_CASE("threshold_at_fmr examples") {
    SUBCASE("ten evenly spaced scores at 10%") {
        std::vector<float> s;
        for (int k = 1; k <= 10; ++k) s.push_back(static_cast<float>(k) / 10.0f);
        const auto oracle = fqb::test::oracle_threshold(s, 0.10);
        const auto r = threshold_at_fmr(s, 0.10);
        CHECK(r.threshold == 1.0f);
        CHECK(r.achieved_fmr == 0.10);
        CHECK(r.threshold == oracle.threshold);
    }
    SUBCASE("ties step past the value") {
        const std::vector<float> s(4, 0.5f);
        const auto r = threshold_at_fmr(s, 0.5);
        CHECK(r.threshold == std::nextafter(0.5f, 2.0f));
        CHECK(r.achieved_fmr == 0.0);
        CHECK(r.threshold == fqb::test::oracle_threshold(s, 0.5).threshold);
    }
    SUBCASE("permissive target admits all but the lowest score") {
        // With FMR <= target, t = min would give FMR 1 > 0.999; the next
        // distinct value is the smallest admissible threshold.
        std::vector<float> s;
        for (int k = 0; k < 1000; ++k) s.push_back(static_cast<float>(k) * 0.001f);
        const auto r = threshold_at_fmr(s, 0.999);
        CHECK(r.threshold == s[1]);
        CHECK(r.achieved_fmr == 0.999);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(threshold_at_fmr(std::vector<float>{}, 0.1), InvalidArgument);
        CHECK_THROWS_AS(threshold_at_fmr(std::vector<float>(999, 0.1f), 0.001), InvalidArgument);
        CHECK_NOTHROW(threshold_at_fmr(std::vector<float>(1000, 0.1f), 0.001));
        CHECK_THROWS_AS(threshold_at_fmr(std::vector<float>(10, 0.1f), 0.0), InvalidArgument);
        CHECK_THROWS_AS(threshold_at_fmr(std::vector<float>(10, 0.1f), 1.0), InvalidArgument);
    }
}

TEST_CASE("threshold_at_fmr agrees with the exhaustive scan") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const double target = 0.005 + 0.5 * rng.uniform();
        const auto min_n = static_cast<std::size_t>(std::ceil(1.0 / target));
        const std::size_t n = min_n + rng.below(400);
        std::vector<float> s(n);
        const bool coarse = rng.uniform() < 0.5;  // coarse grids force ties
        for (float& v : s) {
            v = coarse ? static_cast<float>(rng.below(20)) / 20.0f : static_cast<float>(rng.uniform() * 2.0 - 1.0);
        }
        const auto r = threshold_at_fmr(s, target);
        const auto o = fqb::test::oracle_threshold(s, target);
        CHECK(r.threshold == o.threshold);
        CHECK(r.achieved_fmr == o.fmr);
        CHECK(r.achieved_fmr <= target);
    }
}

TEST_CASE("fnmr_at_threshold") {
    CHECK(fnmr_at_threshold(std::vector<float>{0.9f, 0.8f}, 0.5f) == 0.0);
    CHECK(fnmr_at_threshold(std::vector<float>{0.2f, 0.8f}, 0.5f) == 0.5);
    CHECK(fnmr_at_threshold(std::vector<float>{0.5f}, 0.5f) == 0.0);  // score == threshold matches
    CHECK_THROWS_AS(fnmr_at_threshold(std::vector<float>{}, 0.5f), InvalidArgument);

    SplitMix64 rng(5);
    std::vector<float> g(1000);
    for (float& v : g) v = static_cast<float>(rng.uniform());
    std::vector<float> sorted = g;
    std::sort(sorted.begin(), sorted.end());
    const float median = sorted[500];
    std::size_t below = 0;
    for (float v : g) below += v < median;
    CHECK(fnmr_at_threshold(g, median) == static_cast<double>(below) / 1000.0);
    CHECK(fnmr_at_threshold(g, median) == 0.5);

    double previous = 0.0;
    for (float t = -0.1f; t < 1.1f; t += 0.01f) {
        const double f = fnmr_at_threshold(g, t);
        CHECK(f >= previous);
        previous = f;
    }
}

namespace {

SubgroupRow row_with(const std::string& label, double a, double b) {
    SubgroupRow row;
    row.label = label;
    row.fnmr_at_fmr = {{0.001, a}, {0.01, b}};
    return row;
}

}  // namespace

TEST_CASE("table rendering follows the percent convention") {
    CHECK(render_table_row(row_with("Frontal", 0.0040, 0.0), {0.001, 0.01}) == "Frontal & 0.40% & 0.00%");
    CHECK(render_table_row(row_with("Profile", 0.3095, 0.1014), {0.001, 0.01}) == "Profile & 30.95% & 10.14%");
    SubgroupRow empty;
    empty.label = "[0,2]";
    empty.fnmr_at_fmr = {{0.001, std::nullopt}};
    CHECK(render_table_row(empty, {0.001}) == "[0,2] & --");
}

namespace {

/// Two labels, each with two subjects of two images; impostor scores low.
struct TableFixture {
    Dataset ds;
    ComparisonSet set;
    TableFixture() {
        ds = fqb::test::make_dataset({{"a1", "A"}, {"a1", "A"}, {"a2", "A"}, {"a2", "A"},
                                      {"b1", "B"}, {"b1", "B"}, {"b2", "B"}, {"b2", "B"}},
                                     std::vector<std::vector<float>>(8, {1.0f, 0.0f}));
        set.genuine_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
        set.genuine_scores = {0.9f, 0.95f, 0.2f, 0.9f};
        for (std::uint32_t i = 0; i < 8; ++i) {
            for (std::uint32_t j = i + 1; j < 8; ++j) {
                if (ds.records[i].subject_id == ds.records[j].subject_id) continue;
                set.impostor_pairs.push_back({i, j});
                set.impostor_scores.push_back(0.01f * static_cast<float>(set.impostor_pairs.size()));
            }
        }
    }
};

}  // namespace

TEST_CASE("subgroup_fnmr_table on a constructed dataset") {
    TableFixture f;
    const auto rep = subgroup_fnmr_table(f.ds, f.set, "group", {0.1});
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].label == "A");
    CHECK(rep.rows[1].label == "B");
    CHECK(rep.rows[2].label == "All");
    const float t = rep.global_thresholds.at(0.1).threshold;
    CHECK(t == fqb::test::oracle_threshold(f.set.impostor_scores, 0.1).threshold);
    CHECK(*rep.rows[0].fnmr_at_fmr.at(0.1) == 0.0);  // every A genuine score clears the threshold
    CHECK(*rep.rows[1].fnmr_at_fmr.at(0.1) == 0.5);
    CHECK(*rep.rows[2].fnmr_at_fmr.at(0.1) == 0.25);
    CHECK(rep.rows[0].genuine_count + rep.rows[1].genuine_count == rep.rows[2].genuine_count);
    CHECK(rep.rows[2].impostor_count == f.set.impostor_pairs.size());

    std::ostringstream csv;
    write_report_csv(csv, rep);
    CHECK(csv.str().starts_with("attribute,label,fmr_target,threshold,fnmr,genuine_count,impostor_count\n"));
    CHECK(csv.str().find("group,B,0.1,") != std::string::npos);
    const auto j = to_json(rep);
    CHECK(j["rows"][1]["rates"][0]["fnmr"].get<double>() == 0.5);
}

TEST_CASE("subgroup table is independent of pair order") {
    TableFixture f;
    ComparisonSet shuffled = f.set;
    std::reverse(shuffled.impostor_pairs.begin(), shuffled.impostor_pairs.end());
    std::reverse(shuffled.impostor_scores.begin(), shuffled.impostor_scores.end());
    std::reverse(shuffled.genuine_pairs.begin(), shuffled.genuine_pairs.end());
    std::reverse(shuffled.genuine_scores.begin(), shuffled.genuine_scores.end());
    std::ostringstream a, b;
    write_report_csv(a, subgroup_fnmr_table(f.ds, f.set, "group", {0.1, 0.05}));
    write_report_csv(b, subgroup_fnmr_table(f.ds, shuffled, "group", {0.1, 0.05}));
    CHECK(a.str() == b.str());
}

TEST_CASE("mixed-label genuine pairs count only in All, empty subgroups are marked") {
    TableFixture f;
    f.ds.records[1].attributes["group"] = "C";  // subject a1 now spans A and C
    const auto rep = subgroup_fnmr_table(f.ds, f.set, "group", {0.1});
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.rows[2].label == "C");
    CHECK(rep.rows[2].genuine_count == 0);
    CHECK(!rep.rows[2].fnmr_at_fmr.at(0.1).has_value());
    const std::size_t within = rep.rows[0].genuine_count + rep.rows[1].genuine_count + rep.rows[2].genuine_count;
    CHECK(rep.rows[3].genuine_count > within);
    std::ostringstream csv;
    write_report_csv(csv, rep);
    CHECK(csv.str().find("group,C,0.1,") != std::string::npos);
    CHECK(csv.str().find(",NA,0,") != std::string::npos);
}

TEST_CASE("per-subgroup threshold mode") {
    TableFixture f;
    const auto rep = subgroup_fnmr_table(f.ds, f.set, "group", {0.5}, ThresholdMode::per_subgroup);
    // A's within-label impostors are pairs among images 0..3 across subjects.
    std::vector<float> a_impostors;
    for (std::size_t k = 0; k < f.set.impostor_pairs.size(); ++k) {
        const auto p = f.set.impostor_pairs[k];
        if (p.probe < 4 && p.reference < 4) a_impostors.push_back(f.set.impostor_scores[k]);
    }
    CHECK(*rep.rows[0].thresholds.at(0.5) == fqb::test::oracle_threshold(a_impostors, 0.5).threshold);
    CHECK(*rep.rows.back().thresholds.at(0.5) == rep.global_thresholds.at(0.5).threshold);
    // A target needing more impostors than the subgroup holds is undefined.
    const auto strict = subgroup_fnmr_table(f.ds, f.set, "group", {0.1}, ThresholdMode::per_subgroup);
    CHECK(!strict.rows[0].fnmr_at_fmr.at(0.1).has_value());
}

TEST_CASE("subgroup table errors") {
    TableFixture f;
    CHECK_THROWS_AS(subgroup_fnmr_table(f.ds, f.set, "pose", {0.1}), DataError);
    f.ds.records[3].attributes.clear();
    CHECK_THROWS_AS(subgroup_fnmr_table(f.ds, f.set, "group", {0.1}), DataError);
    ComparisonSet unscored = f.set;
    unscored.genuine_scores.clear();
    CHECK_THROWS_AS(subgroup_fnmr_table(f.ds, unscored, "group", {0.1}), InvalidArgument);
}

TEST_CASE("noisier synthetic subgroup has higher FNMR at 1% FMR") {
    SynthConfig cfg = SynthConfig::default_biased();
    cfg.subgroups = {{"A", 20, 4, 0.1}, {"B", 20, 4, 0.3}};
    const auto data = generate(cfg);
    const auto scored = score_pairs(data.dataset, generate_pairs(data.dataset, {1000, 1, true}));
    const auto rep = subgroup_fnmr_table(data.dataset, scored, "group", {0.01});
    CHECK(*rep.rows[1].fnmr_at_fmr.at(0.01) > *rep.rows[0].fnmr_at_fmr.at(0.01));
}
