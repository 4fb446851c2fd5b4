#pragma once

// Comparison-score quality labels and a linear regressor that predicts them
// from embeddings.
//
// Label for image j:   z_j = (s^G_j - mu^I_j) / sigma^I_j
// where s^G_j aggregates the image's genuine scores, and mu^I_j, sigma^I_j
// are the mean and population standard deviation of its impostor scores.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fqb/dataset.hpp"

namespace fqb {

inline constexpr double kImpostorStdFloor = 1e-6;
inline constexpr double kFeatureScaleFloor = 1e-12;

enum class GenuineAggregate { mean, max };

struct QualityLabel {
    std::size_t image_index = 0;
    double z = 0.0;
    double genuine_mean = 0.0;   // aggregated genuine score (mean by default)
    double impostor_mean = 0.0;
    double impostor_std = 0.0;   // floored at kImpostorStdFloor
};

struct LabelSet {
    std::vector<QualityLabel> labels;
    /// Images without >= 1 genuine and >= 2 impostor comparisons.
    std::vector<std::size_t> omitted;
};

/// Label from one image's raw score lists. Requires non-empty genuine scores
/// and at least two impostor scores.
QualityLabel best_rowden_label(std::span<const double> genuine, std::span<const double> impostor,
                               GenuineAggregate aggregate = GenuineAggregate::mean);

/// Labels every image that satisfies the comparison-count precondition.
/// Throws DataError when none does.
LabelSet quality_labels(const Dataset& dataset, const ComparisonSet& scored,
                        GenuineAggregate aggregate = GenuineAggregate::mean);

/// Standardized ridge model: score = w . ((x - means) / scales) + intercept.
struct RegressorModel {
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_scales;
    double lambda = 0.0;

    // Training metadata.
    std::vector<double> lambda_grid;
    std::vector<double> cv_mse;  // mean validation squared error per grid entry
    std::size_t folds = 0;
    std::size_t training_samples = 0;
    std::uint64_t seed = 0;

    std::size_t dim() const noexcept { return weights.size(); }
};

/// {1e-4, 1e-3, ..., 1e2}
std::vector<double> default_lambda_grid();

struct TrainOptions {
    std::vector<double> lambda_grid = default_lambda_grid();
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    /// Explicit fold id per sample (each in [0, folds)); overrides the seeded shuffle.
    std::optional<std::vector<std::size_t>> fold_assignment;
};

/// Fold ids from a seeded Fisher-Yates shuffle of 0..n-1; the sample at
/// shuffled position k goes to fold k % folds.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Fits the ridge objective (1/n)||Xw - z||^2 + lambda ||w||^2 on
/// standardized features, with an unpenalized intercept. Used for each fold
/// and for the final refit.
RegressorModel fit_ridge(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels, double lambda);

/// Selects lambda by k-fold cross-validation (lowest mean validation squared
/// error, ties to the larger lambda), then refits on all samples.
RegressorModel train_regressor(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                               const TrainOptions& options = {});

double predict(const RegressorModel& model, std::span<const float> features);
QualityScores predict_quality(const RegressorModel& model, const Dataset& dataset);

/// Embedding rows of the labeled images, and their z values.
Eigen::MatrixXd gather_features(const Dataset& dataset, const LabelSet& labels);
Eigen::VectorXd gather_labels(const LabelSet& labels);

nlohmann::ordered_json to_json(const RegressorModel& model);
RegressorModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_model(const std::filesystem::path& path);

}  // namespace fqb
