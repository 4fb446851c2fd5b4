#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fqb/dataset.hpp"
#include "fqb/quality_serfiq.hpp"

namespace fqb {

struct SubgroupSpec {
    std::string label;
    std::size_t subject_count = 1;
    std::size_t images_per_subject = 1;
    double noise_scale = 0.1;
};

struct SynthConfig {
    std::size_t dim = 32;             // D
    std::size_t activation_dim = 64;  // H
    std::string attribute = "group";
    std::vector<SubgroupSpec> subgroups;
    std::uint64_t seed = 42;

    /// Two subgroups, "clean" (noise 0.1) and "noisy" (noise 0.3), 20 subjects
    /// of 4 images each, D=32, H=64, seed 42.
    static SynthConfig default_biased();
    void validate() const;
};

nlohmann::ordered_json to_json(const SynthConfig& config);
/// Missing keys keep their default_biased() values.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SyntheticData {
    Dataset dataset;
    std::vector<double> noise_magnitude;  // per image, noise_scale * |gaussian draw|
    LastLayer layer;
};

/// H x D weights with orthonormal columns (Gram-Schmidt, applied twice, on a
/// seeded Gaussian matrix), identity activation, zero bias. Throws
/// InvalidArgument when H < D.
LastLayer make_last_layer(const SynthConfig& config);

/// Each subject gets a class-mean direction uniform on the unit sphere; each
/// image embedding is normalize(mean + noise_scale * g) with g ~ N(0, I).
/// Activations are (1 + |noise|) * W e, so the last layer maps them back to a
/// scaled copy of the embedding and dropout spread grows with image noise.
/// Every subject and image draws from its own sub-stream of `seed`.
SyntheticData generate(const SynthConfig& config);

/// metadata.csv, embeddings.fqbe, activations.fqbe, last_layer.fqbe (+ .json),
/// truth.csv (image_id,noise_magnitude) and config.json.
void write_synthetic(const SyntheticData& data, const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace fqb
