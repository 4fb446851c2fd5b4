#include "fqb/quality_bestrowden.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "fqb/error.hpp"
#include "fqb/parallel.hpp"
#include "fqb/rng.hpp"

namespace fqb {

QualityLabel best_rowden_label(std::span<const double> genuine, std::span<const double> impostor,
                               GenuineAggregate aggregate) {
    if (genuine.empty()) throw InvalidArgument("quality label needs at least one genuine score");
    if (impostor.size() < 2) throw InvalidArgument("quality label needs at least two impostor scores");
    QualityLabel label;
    if (aggregate == GenuineAggregate::max) {
        label.genuine_mean = *std::max_element(genuine.begin(), genuine.end());
    } else {
        label.genuine_mean = std::accumulate(genuine.begin(), genuine.end(), 0.0) / static_cast<double>(genuine.size());
    }
    const double n = static_cast<double>(impostor.size());
    label.impostor_mean = std::accumulate(impostor.begin(), impostor.end(), 0.0) / n;
    double sq = 0.0;
    for (double s : impostor) sq += (s - label.impostor_mean) * (s - label.impostor_mean);
    label.impostor_std = std::max(std::sqrt(sq / n), kImpostorStdFloor);
    label.z = (label.genuine_mean - label.impostor_mean) / label.impostor_std;
    if (!std::isfinite(label.z)) throw InvalidArgument("non-finite quality label");
    return label;
}

LabelSet quality_labels(const Dataset& dataset, const ComparisonSet& scored, GenuineAggregate aggregate) {
    if (!scored.scored()) throw InvalidArgument("comparison set is not scored");
    const std::size_t n = dataset.size();
    std::vector<std::vector<double>> genuine(n), impostor(n);
    auto collect = [n](const std::vector<IndexPair>& pairs, const std::vector<float>& scores,
                       std::vector<std::vector<double>>& out) {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pairs[k].probe >= n || pairs[k].reference >= n) throw InvalidArgument("pair index out of range");
            out[pairs[k].probe].push_back(scores[k]);
            out[pairs[k].reference].push_back(scores[k]);
        }
    };
    collect(scored.genuine_pairs, scored.genuine_scores, genuine);
    collect(scored.impostor_pairs, scored.impostor_scores, impostor);

    LabelSet set;
    for (std::size_t i = 0; i < n; ++i) {
        if (genuine[i].empty() || impostor[i].size() < 2) {
            set.omitted.push_back(i);
            continue;
        }
        QualityLabel label = best_rowden_label(genuine[i], impostor[i], aggregate);
        label.image_index = i;
        set.labels.push_back(label);
    }
    if (set.labels.empty()) {
        throw DataError("no image has both a genuine comparison and two impostor comparisons");
    }
    return set;
}

std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2}; }

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    std::vector<std::size_t> fold(n);
    for (std::size_t k = 0; k < n; ++k) fold[order[k]] = k % folds;
    return fold;
}

RegressorModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels, double lambda) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n == 0 || d == 0) throw InvalidArgument("ridge fit needs at least one sample and one feature");
    if (labels.size() != n) throw InvalidArgument("feature and label counts differ");
    if (!(lambda >= 0.0)) throw InvalidArgument("ridge strength must be non-negative");

    RegressorModel model;
    model.lambda = lambda;
    model.training_samples = static_cast<std::size_t>(n);
    model.feature_means.resize(static_cast<std::size_t>(d));
    model.feature_scales.resize(static_cast<std::size_t>(d));
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        const auto col = features.col(c);
        // A constant column keeps its exact value as mean, so it standardizes to zeros.
        const double mean = col.minCoeff() == col.maxCoeff() ? col(0) : col.mean();
        const double var = (col.array() - mean).square().mean();
        const double scale = std::max(std::sqrt(var), kFeatureScaleFloor);
        model.feature_means[static_cast<std::size_t>(c)] = mean;
        model.feature_scales[static_cast<std::size_t>(c)] = scale;
        x.col(c) = (col.array() - mean) / scale;
    }
    model.intercept = labels.mean();
    const Eigen::VectorXd centered = labels.array() - model.intercept;
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd gram = x.transpose() * x * inv_n;
    gram.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = x.transpose() * centered * inv_n;
    const Eigen::VectorXd w = gram.ldlt().solve(rhs);
    if (!w.allFinite()) throw DataError("ridge system is singular; use a positive lambda");
    model.weights.assign(w.data(), w.data() + w.size());
    return model;
}

namespace {

double predict_row(const RegressorModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    double score = model.intercept;
    for (std::size_t c = 0; c < model.weights.size(); ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        score += model.weights[c] * (row(ci) - model.feature_means[c]) / model.feature_scales[c];
    }
    return score;
}

}  // namespace

RegressorModel train_regressor(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                               const TrainOptions& options) {
    const auto n = static_cast<std::size_t>(features.rows());
    if (labels.size() != features.rows()) throw InvalidArgument("feature and label counts differ");
    if (features.cols() == 0) throw InvalidArgument("regressor needs D >= 1");
    if (options.folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
    if (n < options.folds) {
        throw InvalidArgument(fmt::format("{} labeled samples is fewer than {} folds", n, options.folds));
    }
    if (options.lambda_grid.empty()) throw InvalidArgument("empty lambda grid");
    if (!features.allFinite() || !labels.allFinite()) throw InvalidArgument("non-finite training data");

    std::vector<std::size_t> fold;
    if (options.fold_assignment) {
        fold = *options.fold_assignment;
        if (fold.size() != n) throw InvalidArgument("fold assignment length differs from sample count");
        for (std::size_t f : fold) {
            if (f >= options.folds) throw InvalidArgument("fold id out of range");
        }
    } else {
        fold = assign_folds(n, options.folds, options.seed);
    }

    std::vector<double> cv_mse;
    for (double lambda : options.lambda_grid) {
        double squared_error = 0.0;
        for (std::size_t f = 0; f < options.folds; ++f) {
            std::vector<Eigen::Index> train, valid;
            for (std::size_t i = 0; i < n; ++i) {
                (fold[i] == f ? valid : train).push_back(static_cast<Eigen::Index>(i));
            }
            if (valid.empty()) continue;
            if (train.empty()) throw InvalidArgument("a fold leaves no training samples");
            const RegressorModel m = fit_ridge(features(train, Eigen::all), labels(train), lambda);
            for (Eigen::Index i : valid) {
                const double err = predict_row(m, features.row(i)) - labels(i);
                squared_error += err * err;
            }
        }
        cv_mse.push_back(squared_error / static_cast<double>(n));
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < cv_mse.size(); ++k) {
        if (cv_mse[k] < cv_mse[best] ||
            (cv_mse[k] == cv_mse[best] && options.lambda_grid[k] > options.lambda_grid[best])) {
            best = k;
        }
    }
    RegressorModel model = fit_ridge(features, labels, options.lambda_grid[best]);
    model.lambda_grid = options.lambda_grid;
    model.cv_mse = std::move(cv_mse);
    model.folds = options.folds;
    model.seed = options.seed;
    return model;
}

double predict(const RegressorModel& model, std::span<const float> features) {
    if (features.size() != model.dim()) {
        throw InvalidArgument(fmt::format("model expects {} features, got {}", model.dim(), features.size()));
    }
    double score = model.intercept;
    for (std::size_t c = 0; c < features.size(); ++c) {
        score += model.weights[c] * (features[c] - model.feature_means[c]) / model.feature_scales[c];
    }
    return score;
}

QualityScores predict_quality(const RegressorModel& model, const Dataset& dataset) {
    if (dataset.embeddings.cols() != model.dim()) {
        throw DataError(fmt::format("model expects {} features but embeddings have {} columns", model.dim(),
                                    dataset.embeddings.cols()));
    }
    QualityScores scores{"bestrowden", std::vector<double>(dataset.size())};
    parallel_for(dataset.size(), [&](std::size_t i) { scores.values[i] = predict(model, dataset.embeddings.row(i)); });
    return scores;
}

Eigen::MatrixXd gather_features(const Dataset& dataset, const LabelSet& labels) {
    const auto d = static_cast<Eigen::Index>(dataset.embeddings.cols());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(labels.labels.size()), d);
    for (std::size_t r = 0; r < labels.labels.size(); ++r) {
        const auto row = dataset.embeddings.row(labels.labels[r].image_index);
        for (Eigen::Index c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    }
    return x;
}

Eigen::VectorXd gather_labels(const LabelSet& labels) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(labels.labels.size()));
    for (std::size_t r = 0; r < labels.labels.size(); ++r) z(static_cast<Eigen::Index>(r)) = labels.labels[r].z;
    return z;
}

nlohmann::ordered_json to_json(const RegressorModel& model) {
    nlohmann::ordered_json j;
    j["kind"] = "ridge";
    j["weights"] = model.weights;
    j["intercept"] = model.intercept;
    j["feature_means"] = model.feature_means;
    j["feature_scales"] = model.feature_scales;
    j["lambda"] = model.lambda;
    j["training"] = {{"lambda_grid", model.lambda_grid},
                     {"cv_mse", model.cv_mse},
                     {"folds", model.folds},
                     {"samples", model.training_samples},
                     {"seed", model.seed}};
    return j;
}

RegressorModel model_from_json(const nlohmann::json& j) {
    RegressorModel model;
    try {
        model.weights = j.at("weights").get<std::vector<double>>();
        model.intercept = j.at("intercept").get<double>();
        model.feature_means = j.at("feature_means").get<std::vector<double>>();
        model.feature_scales = j.at("feature_scales").get<std::vector<double>>();
        model.lambda = j.at("lambda").get<double>();
        if (j.contains("training")) {
            const auto& t = j.at("training");
            model.lambda_grid = t.value("lambda_grid", std::vector<double>{});
            model.cv_mse = t.value("cv_mse", std::vector<double>{});
            model.folds = t.value("folds", std::size_t{0});
            model.training_samples = t.value("samples", std::size_t{0});
            model.seed = t.value("seed", std::uint64_t{0});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed regressor model: {}", e.what()));
    }
    const std::size_t d = model.weights.size();
    if (d == 0 || model.feature_means.size() != d || model.feature_scales.size() != d) {
        throw DataError("regressor model dimensions are inconsistent");
    }
    for (double s : model.feature_scales) {
        if (!(s > 0.0)) throw DataError("regressor model has a non-positive feature scale");
    }
    return model;
}

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << to_json(model).dump(2) << '\n';
}

RegressorModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open model '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return model_from_json(j);
}

}  // namespace fqb
