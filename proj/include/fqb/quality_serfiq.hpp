#pragma once

// Stochastic embedding robustness quality (SER-FIQ).
//
// An image's pre-last-layer activation vector is pushed through the last
// layer m times, each time under a fresh dropout mask on the layer input.
// The spread of the resulting m stochastic embeddings measures robustness:
//
//     q = 2 * sigmoid( -(2 / m^2) * sum_{i<j} ||x_i - x_j|| )
//
// so q is 1 when all embeddings coincide and falls toward 0 as they scatter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fqb/dataset.hpp"

namespace fqb {

enum class Activation { identity, tanh };

std::string to_string(Activation activation);
Activation parse_activation(const std::string& name);

/// Final dense layer: embedding = act(W^T a + bias), W is H x D (row-major),
/// kept in double precision.
struct LastLayer {
    std::size_t input_dim = 0;   // H
    std::size_t output_dim = 0;  // D
    std::vector<double> weights;
    std::vector<double> bias;    // empty or length D
    Activation activation = Activation::identity;

    double weight(std::size_t h, std::size_t d) const { return weights[h * output_dim + d]; }
    /// Throws InvalidArgument on inconsistent shapes or non-finite entries.
    void validate() const;
};

/// Weights stored as an FQBE matrix; `<stem>.json` next to it carries
/// {"activation": "identity"|"tanh", "bias": [...]} (absent = identity, no bias).
LastLayer load_last_layer(const std::filesystem::path& fqbe_path);
void save_last_layer(const std::filesystem::path& fqbe_path, const LastLayer& layer);

/// m stochastic embeddings, row-major m x D.
struct StochasticEmbeddingSet {
    std::size_t m = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// Draws m Bernoulli keep-masks (keep probability 1 - dropout_rate) over the
/// H activation entries and evaluates
///     x_i = act( W^T (a .* mask_i) / (1 - dropout_rate) + bias ).
/// Masks consume the SplitMix64 stream seeded by `seed` in order: embedding i,
/// then input index h; entry kept when uniform() < 1 - dropout_rate.
StochasticEmbeddingSet stochastic_embeddings(std::span<const float> activation, const LastLayer& layer,
                                             std::size_t m, double dropout_rate, std::uint64_t seed);

/// 1 / (1 + e^-t), branching on the sign of t so large |t| cannot overflow.
double sigmoid(double t);

/// Quality from the mean pairwise Euclidean distance of the set. With
/// `normalize`, each embedding is scaled to unit length first.
double serfiq_quality(const StochasticEmbeddingSet& set, bool normalize = false);

struct SerfiqOptions {
    std::size_t m = 100;
    double dropout_rate = 0.5;
    std::uint64_t seed = 1;
    bool normalize = false;
};

/// Per-image stream seed: stream_seed(seed, fnv1a64(image_id)), so scores do
/// not depend on row order or on the thread schedule.
std::uint64_t serfiq_image_seed(std::uint64_t seed, const std::string& image_id);

/// Quality for every image of a dataset that carries activations.
QualityScores serfiq_dataset(const Dataset& dataset, const LastLayer& layer, const SerfiqOptions& options = {});

}  // namespace fqb
