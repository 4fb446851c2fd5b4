#include "fqb/quality_serfiq.hpp"

#include <cmath>
#include <fstream>

#include <fmt/core.h>
#include <json.hpp>

#include "fqb/dataset_io.hpp"
#include "fqb/error.hpp"
#include "fqb/parallel.hpp"
#include "fqb/rng.hpp"

namespace fqb {

std::string to_string(Activation activation) {
    return activation == Activation::tanh ? "tanh" : "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    throw DataError(fmt::format("unknown activation '{}' (expected identity or tanh)", name));
}

void LastLayer::validate() const {
    if (input_dim == 0 || output_dim == 0) throw InvalidArgument("last layer needs H >= 1 and D >= 1");
    if (weights.size() != input_dim * output_dim) {
        throw InvalidArgument(fmt::format("last layer weights hold {} values, expected {}x{}", weights.size(),
                                          input_dim, output_dim));
    }
    if (!bias.empty() && bias.size() != output_dim) {
        throw InvalidArgument(fmt::format("bias length {} does not match D={}", bias.size(), output_dim));
    }
    for (double w : weights) {
        if (!std::isfinite(w)) throw InvalidArgument("non-finite last layer weight");
    }
    for (double b : bias) {
        if (!std::isfinite(b)) throw InvalidArgument("non-finite last layer bias");
    }
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& fqbe_path) {
    auto p = fqbe_path;
    return p.replace_extension(".json");
}

}  // namespace

LastLayer load_last_layer(const std::filesystem::path& fqbe_path) {
    const EmbeddingMatrix w = read_fqbe(fqbe_path);
    LastLayer layer;
    layer.input_dim = w.rows();
    layer.output_dim = w.cols();
    layer.weights.assign(w.values().begin(), w.values().end());
    const auto side = sidecar_path(fqbe_path);
    if (std::filesystem::exists(side)) {
        std::ifstream in(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            layer.activation = parse_activation(j.value("activation", std::string("identity")));
            if (j.contains("bias")) layer.bias = j.at("bias").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("{}: {}", side.string(), e.what()));
        }
    }
    try {
        layer.validate();
    } catch (const InvalidArgument& e) {
        throw DataError(fmt::format("{}: {}", fqbe_path.string(), e.what()));
    }
    return layer;
}

void save_last_layer(const std::filesystem::path& fqbe_path, const LastLayer& layer) {
    layer.validate();
    std::vector<float> values(layer.weights.begin(), layer.weights.end());
    write_fqbe(fqbe_path, EmbeddingMatrix(layer.input_dim, layer.output_dim, std::move(values)));
    nlohmann::ordered_json j;
    j["activation"] = to_string(layer.activation);
    j["bias"] = layer.bias;
    std::ofstream out(sidecar_path(fqbe_path), std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", sidecar_path(fqbe_path).string()));
    out << j.dump(2) << '\n';
}

StochasticEmbeddingSet stochastic_embeddings(std::span<const float> activation, const LastLayer& layer,
                                             std::size_t m, double dropout_rate, std::uint64_t seed) {
    layer.validate();
    if (activation.size() != layer.input_dim) {
        throw InvalidArgument(fmt::format("activation length {} does not match layer input H={}", activation.size(),
                                          layer.input_dim));
    }
    if (m < 2) throw InvalidArgument("SER-FIQ needs m >= 2 stochastic embeddings");
    if (!(dropout_rate > 0.0 && dropout_rate < 1.0)) {
        throw InvalidArgument(fmt::format("dropout rate {} outside (0, 1)", dropout_rate));
    }
    const double keep = 1.0 - dropout_rate;
    const double scale = 1.0 / keep;
    const std::size_t h_dim = layer.input_dim;
    const std::size_t d_dim = layer.output_dim;

    StochasticEmbeddingSet set{m, d_dim, std::vector<double>(m * d_dim, 0.0)};
    SplitMix64 rng(seed);
    std::vector<double> masked(h_dim);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t h = 0; h < h_dim; ++h) {
            masked[h] = rng.uniform() < keep ? static_cast<double>(activation[h]) * scale : 0.0;
        }
        double* x = set.values.data() + i * d_dim;
        for (std::size_t h = 0; h < h_dim; ++h) {
            if (masked[h] == 0.0) continue;
            const double* w = layer.weights.data() + h * d_dim;
            for (std::size_t d = 0; d < d_dim; ++d) x[d] += w[d] * masked[h];
        }
        for (std::size_t d = 0; d < d_dim; ++d) {
            if (!layer.bias.empty()) x[d] += layer.bias[d];
            if (layer.activation == Activation::tanh) x[d] = std::tanh(x[d]);
        }
    }
    return set;
}

double sigmoid(double t) {
    if (t > 30.0) return 1.0 / (1.0 + std::exp(-t));
    if (t < -30.0) {
        const double e = std::exp(t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(-t));
}

double serfiq_quality(const StochasticEmbeddingSet& set, bool normalize) {
    if (set.m < 2) throw InvalidArgument("SER-FIQ needs m >= 2 stochastic embeddings");
    if (set.values.size() != set.m * set.dim) throw InvalidArgument("stochastic embedding set has wrong size");
    for (double v : set.values) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite stochastic embedding");
    }
    std::vector<double> rows = set.values;
    if (normalize) {
        for (std::size_t i = 0; i < set.m; ++i) {
            double sq = 0.0;
            for (std::size_t d = 0; d < set.dim; ++d) sq += rows[i * set.dim + d] * rows[i * set.dim + d];
            if (sq == 0.0) continue;
            const double norm = std::sqrt(sq);
            for (std::size_t d = 0; d < set.dim; ++d) rows[i * set.dim + d] /= norm;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < set.m; ++i) {
        for (std::size_t j = i + 1; j < set.m; ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < set.dim; ++d) {
                const double diff = rows[i * set.dim + d] - rows[j * set.dim + d];
                sq += diff * diff;
            }
            total += std::sqrt(sq);
        }
    }
    const double m = static_cast<double>(set.m);
    return 2.0 * sigmoid(-(2.0 / (m * m)) * total);
}

std::uint64_t serfiq_image_seed(std::uint64_t seed, const std::string& image_id) {
    return stream_seed(seed, fnv1a64(image_id));
}

QualityScores serfiq_dataset(const Dataset& dataset, const LastLayer& layer, const SerfiqOptions& options) {
    if (!dataset.activations) throw DataError("SER-FIQ needs the activation matrix, but the dataset has none");
    const auto& acts = *dataset.activations;
    if (acts.cols() != layer.input_dim) {
        throw DataError(fmt::format("activation matrix has {} columns but the last layer expects H={}", acts.cols(),
                                    layer.input_dim));
    }
    QualityScores scores{"serfiq", std::vector<double>(dataset.size())};
    parallel_for(dataset.size(), [&](std::size_t i) {
        const auto set = stochastic_embeddings(acts.row(i), layer, options.m, options.dropout_rate,
                                               serfiq_image_seed(options.seed, dataset.records[i].image_id));
        scores.values[i] = serfiq_quality(set, options.normalize);
    });
    return scores;
}

}  // namespace fqb
