#include <doctest.h>

#include <cmath>

#include "fqb/error.hpp"
#include "fqb/quality_bestrowden.hpp"
#include "fqb/rng.hpp"
#include "support.hpp"

using namespace fqb;

namespace {

QualityLabel label(std::vector<double> genuine, std::vector<double> impostor,
                   GenuineAggregate aggregate = GenuineAggregate::mean) {
    return best_rowden_label(genuine, impostor, aggregate);
}

/// N x D uniform features in [-1, 1].
Eigen::MatrixXd random_features(std::size_t n, std::size_t d, SplitMix64& rng) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform() * 2.0 - 1.0;
    }
    return x;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& x) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        out.emplace_back();
        for (Eigen::Index c = 0; c < x.cols(); ++c) out.back().push_back(x(r, c));
    }
    return out;
}

double predict_raw(const RegressorModel& m, const Eigen::RowVectorXd& row) {
    double s = m.intercept;
    for (std::size_t c = 0; c < m.weights.size(); ++c) {
        s += m.weights[c] * (row(static_cast<Eigen::Index>(c)) - m.feature_means[c]) / m.feature_scales[c];
    }
    return s;
}

/// (1/n)||X_std w + b - z||^2 + lambda ||w||^2 evaluated from a model.
double objective(const RegressorModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                 const std::vector<double>& w, double b) {
    double loss = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double s = b;
        for (std::size_t c = 0; c < w.size(); ++c) {
            s += w[c] * (x(r, static_cast<Eigen::Index>(c)) - m.feature_means[c]) / m.feature_scales[c];
        }
        loss += (s - z(r)) * (s - z(r));
    }
    double penalty = 0.0;
    for (double v : w) penalty += v * v;
    return loss / static_cast<double>(x.rows()) + m.lambda * penalty;
}

}  // namespace

TEST_CASE("label arithmetic") {
    const auto l = label({0.9}, {0.1, 0.3});
    CHECK(std::abs(l.impostor_mean - 0.2) < 1e-15);
    CHECK(std::abs(l.impostor_std - 0.1) < 1e-15);  // population, not sample (which would be 0.1414)
    CHECK(l.z == 7.0);
    CHECK(l.genuine_mean == 0.9);

    const auto flat = label({0.8}, {0.3, 0.3, 0.3});
    CHECK(flat.impostor_std == kImpostorStdFloor);
    CHECK(flat.z == doctest::Approx(0.5 / 1e-6));
    CHECK(label({0.1}, {0.3, 0.3}).z < 0.0);

    CHECK(std::abs(label({0.5}, {0.5 - 1e-3, 0.5 + 1e-3}).z) < 1e-9);

    CHECK(label({0.2, 0.6}, {0.1, 0.3}).genuine_mean == doctest::Approx(0.4));
    CHECK(label({0.2, 0.6}, {0.1, 0.3}, GenuineAggregate::max).genuine_mean == 0.6);

    CHECK_THROWS_AS(label({}, {0.1, 0.3}), InvalidArgument);
    CHECK_THROWS_AS(label({0.9}, {0.1}), InvalidArgument);
}

TEST_CASE("label is invariant under a positive affine map of all scores") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> g(1 + rng.below(4)), i(2 + rng.below(20));
        for (double& v : g) v = rng.uniform();
        for (double& v : i) v = rng.uniform() * 0.5;
        const double a = 0.1 + 5.0 * rng.uniform();
        const double b = rng.uniform() * 2.0 - 1.0;
        auto g2 = g, i2 = i;
        for (double& v : g2) v = a * v + b;
        for (double& v : i2) v = a * v + b;
        const double z1 = label(g, i).z;
        const double z2 = label(g2, i2).z;
        CHECK(std::abs(z1 - z2) <= 1e-9 * std::max(1.0, std::abs(z1)));
    }
}

TEST_CASE("quality_labels collects per-image comparisons") {
    Dataset ds = fqb::test::make_dataset({{"a", "g"}, {"a", "g"}, {"b", "g"}, {"c", "g"}},
                                         std::vector<std::vector<float>>(4, {1.0f}));
    ComparisonSet set;
    set.genuine_pairs = {{0, 1}};
    set.genuine_scores = {0.9f};
    set.impostor_pairs = {{0, 2}, {0, 3}, {1, 2}, {2, 3}};
    set.impostor_scores = {0.1f, 0.3f, 0.2f, 0.0f};
    const LabelSet labels = quality_labels(ds, set);
    REQUIRE(labels.labels.size() == 1);
    CHECK(labels.labels[0].image_index == 0);
    CHECK(labels.labels[0].z == doctest::Approx(7.0).epsilon(1e-5));
    CHECK(labels.omitted == std::vector<std::size_t>{1, 2, 3});

    CHECK(gather_labels(labels).size() == 1);
    CHECK(gather_features(ds, labels).rows() == 1);

    set.genuine_pairs.clear();
    set.genuine_scores.clear();
    CHECK_THROWS_AS(quality_labels(ds, set), DataError);
}

TEST_CASE("ridge recovers a noiseless line") {
    SplitMix64 rng(3);
    Eigen::MatrixXd x = random_features(200, 1, rng);
    Eigen::VectorXd z = (2.0 * x.col(0)).array() + 1.0;
    TrainOptions opt;
    opt.lambda_grid = {1e-6, 1e-2, 1.0};
    const RegressorModel m = train_regressor(x, z, opt);
    CHECK(m.lambda == 1e-6);
    CHECK(std::abs(m.weights[0] / m.feature_scales[0] - 2.0) < 1e-3);
    Eigen::RowVectorXd held(1);
    held << 0.25;
    CHECK(std::abs(predict_raw(m, held) - 1.5) < 1e-2);
    const std::vector<float> f{0.25f};
    CHECK(std::abs(predict(m, f) - 1.5) < 1e-2);
    CHECK(m.cv_mse.size() == 3);
    CHECK(m.folds == 5);
    CHECK(m.training_samples == 200);
}

TEST_CASE("constant labels give a flat model") {
    SplitMix64 rng(4);
    const Eigen::MatrixXd x = random_features(50, 3, rng);
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(50, 0.7);
    const RegressorModel m = train_regressor(x, z);
    for (double w : m.weights) CHECK(std::abs(w) < 1e-12);
    CHECK(std::abs(m.intercept - 0.7) < 1e-12);
}

TEST_CASE("constant feature columns are tolerated") {
    SplitMix64 rng(5);
    Eigen::MatrixXd x = random_features(40, 2, rng);
    x.col(1).setConstant(0.3);
    Eigen::VectorXd z = x.col(0) * 3.0;
    const RegressorModel m = train_regressor(x, z);
    CHECK(m.feature_scales[1] == kFeatureScaleFloor);
    CHECK(m.weights[1] == 0.0);
    CHECK(std::isfinite(m.weights[0]));
}

TEST_CASE("duplicated data with paired folds selects the same model") {
    SplitMix64 rng(6);
    const Eigen::MatrixXd x = random_features(60, 4, rng);
    Eigen::VectorXd z(60);
    for (Eigen::Index r = 0; r < 60; ++r) z(r) = x(r, 0) - 0.5 * x(r, 2) + 0.3 * rng.gaussian();

    TrainOptions base;
    base.fold_assignment = assign_folds(60, 5, 9);
    const RegressorModel a = train_regressor(x, z, base);

    Eigen::MatrixXd x2(120, 4);
    Eigen::VectorXd z2(120);
    std::vector<std::size_t> folds2(120);
    for (Eigen::Index r = 0; r < 60; ++r) {
        x2.row(2 * r) = x.row(r);
        x2.row(2 * r + 1) = x.row(r);
        z2(2 * r) = z2(2 * r + 1) = z(r);
        folds2[static_cast<std::size_t>(2 * r)] = folds2[static_cast<std::size_t>(2 * r + 1)] =
            (*base.fold_assignment)[static_cast<std::size_t>(r)];
    }
    TrainOptions dup;
    dup.fold_assignment = folds2;
    const RegressorModel b = train_regressor(x2, z2, dup);
    CHECK(a.lambda == b.lambda);
    CHECK(std::abs(a.intercept - b.intercept) < 1e-9);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::abs(a.weights[c] - b.weights[c]) < 1e-9);
        CHECK(std::abs(a.feature_means[c] - b.feature_means[c]) < 1e-9);
        CHECK(std::abs(a.feature_scales[c] - b.feature_scales[c]) < 1e-9);
    }
    for (std::size_t k = 0; k < a.cv_mse.size(); ++k) CHECK(std::abs(a.cv_mse[k] - b.cv_mse[k]) < 1e-9);
}

TEST_CASE("fitted values match the least-squares oracle") {
    SplitMix64 rng(7);
    const Eigen::MatrixXd x = random_features(300, 3, rng);
    Eigen::VectorXd z(300);
    for (Eigen::Index r = 0; r < 300; ++r) z(r) = 0.4 + x(r, 0) - 2.0 * x(r, 1) + 0.1 * rng.gaussian();
    const RegressorModel m = fit_ridge(x, z, 0.0);
    const auto beta = fqb::test::oracle_ols(rows_of(x), std::vector<double>(z.data(), z.data() + 300));
    for (Eigen::Index r = 0; r < 300; ++r) {
        double oracle = beta[0];
        for (Eigen::Index c = 0; c < 3; ++c) oracle += beta[static_cast<std::size_t>(c) + 1] * x(r, c);
        CHECK(std::abs(predict_raw(m, x.row(r)) - oracle) < 1e-6);
    }
}

TEST_CASE("returned ridge solution beats random perturbations") {
    SplitMix64 rng(8);
    const Eigen::MatrixXd x = random_features(80, 5, rng);
    Eigen::VectorXd z(80);
    for (Eigen::Index r = 0; r < 80; ++r) z(r) = x.row(r).sum() + 0.5 * rng.gaussian();
    for (double lambda : {1e-3, 0.1, 10.0}) {
        const RegressorModel m = fit_ridge(x, z, lambda);
        const double best = objective(m, x, z, m.weights, m.intercept);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> dir(6);
            double norm = 0.0;
            for (double& v : dir) {
                v = rng.gaussian();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            auto w = m.weights;
            for (std::size_t c = 0; c < 5; ++c) w[c] += 1e-2 * dir[c] / norm;
            CHECK(objective(m, x, z, w, m.intercept + 1e-2 * dir[5] / norm) > best);
        }
    }
}

TEST_CASE("cross-validation picks the grid minimum") {
    SplitMix64 rng(9);
    const Eigen::MatrixXd x = random_features(100, 6, rng);
    Eigen::VectorXd z(100);
    for (Eigen::Index r = 0; r < 100; ++r) z(r) = x(r, 0) + rng.gaussian();
    const RegressorModel m = train_regressor(x, z);
    std::size_t argmin = 0;
    for (std::size_t k = 0; k < m.cv_mse.size(); ++k) {
        if (m.cv_mse[k] <= m.cv_mse[argmin]) argmin = k;
    }
    CHECK(m.lambda == m.lambda_grid[argmin]);
}

TEST_CASE("assign_folds balances and is seeded") {
    const auto f = assign_folds(23, 5, 1);
    std::vector<int> counts(5, 0);
    for (auto v : f) ++counts[v];
    for (int c : counts) CHECK((c == 4 || c == 5));
    CHECK(assign_folds(23, 5, 1) == f);
    CHECK(assign_folds(23, 5, 2) != f);
}

TEST_CASE("training argument errors") {
    SplitMix64 rng(10);
    const Eigen::MatrixXd x = random_features(4, 2, rng);
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
    CHECK_THROWS_AS(train_regressor(x, z), InvalidArgument);  // 4 samples < 5 folds
    CHECK_THROWS_AS(train_regressor(x, Eigen::VectorXd::Zero(3)), InvalidArgument);
    TrainOptions empty;
    empty.lambda_grid.clear();
    const Eigen::MatrixXd x6 = random_features(6, 2, rng);
    CHECK_THROWS_AS(train_regressor(x6, Eigen::VectorXd::Zero(6), empty), InvalidArgument);
    TrainOptions bad_folds;
    bad_folds.fold_assignment = std::vector<std::size_t>{0, 1, 2, 3, 4, 5};
    CHECK_THROWS_AS(train_regressor(x6, Eigen::VectorXd::Zero(6), bad_folds), InvalidArgument);
}

TEST_CASE("prediction and model files") {
    RegressorModel zero;
    zero.weights = {0.0, 0.0};
    zero.feature_means = {0.0, 0.0};
    zero.feature_scales = {1.0, 1.0};
    zero.intercept = 0.3;
    Dataset ds = fqb::test::make_dataset({{"a", "g"}, {"b", "g"}, {"c", "g"}}, {{1, 2}, {-3, 0.5}, {0, 0}});
    const auto q = predict_quality(zero, ds);
    CHECK(q.estimator_name == "bestrowden");
    CHECK(q.values == std::vector<double>{0.3, 0.3, 0.3});
    CHECK_THROWS_AS(predict(zero, std::vector<float>{1.0f}), InvalidArgument);
    Dataset wide = fqb::test::make_dataset({{"a", "g"}}, {{1, 2, 3}});
    CHECK_THROWS_AS(predict_quality(zero, wide), DataError);

    SplitMix64 rng(11);
    const Eigen::MatrixXd x = random_features(30, 2, rng);
    const RegressorModel m = train_regressor(x, x.col(0) * 0.5);
    fqb::test::TempDir dir;
    save_model(dir.path() / "model.json", m);
    const RegressorModel back = load_model(dir.path() / "model.json");
    CHECK(back.weights == m.weights);
    CHECK(back.intercept == m.intercept);
    CHECK(back.feature_means == m.feature_means);
    CHECK(back.feature_scales == m.feature_scales);
    CHECK(back.lambda == m.lambda);
    CHECK(back.cv_mse == m.cv_mse);
    CHECK(back.folds == m.folds);

    fqb::test::spit(dir.path() / "bad.json", R"({"weights": [1], "intercept": 0, "feature_means": [0],
                                               "feature_scales": [0], "lambda": 1})");
    CHECK_THROWS_AS(load_model(dir.path() / "bad.json"), DataError);
    fqb::test::spit(dir.path() / "broken.json", "{");
    CHECK_THROWS_AS(load_model(dir.path() / "broken.json"), DataError);
    CHECK_THROWS_AS(load_model(dir.path() / "absent.json"), DataError);
}
