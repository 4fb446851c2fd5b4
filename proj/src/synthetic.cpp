#include "fqb/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/core.h>

#include "fqb/csv.hpp"
#include "fqb/dataset_io.hpp"
#include "fqb/error.hpp"
#include "fqb/rng.hpp"

namespace fqb {

namespace {

constexpr std::uint64_t kLayerStream = 0x4C41594552ULL;  // "LAYER"

std::vector<double> unit_gaussian_direction(SplitMix64& rng, std::size_t dim) {
    for (;;) {
        std::vector<double> v(dim);
        double sq = 0.0;
        for (double& x : v) {
            x = rng.gaussian();
            sq += x * x;
        }
        if (sq > 0.0) {
            const double norm = std::sqrt(sq);
            for (double& x : v) x /= norm;
            return v;
        }
    }
}

}  // namespace

SynthConfig SynthConfig::default_biased() {
    SynthConfig c;
    c.subgroups = {{"clean", 20, 4, 0.1}, {"noisy", 20, 4, 0.3}};
    return c;
}

void SynthConfig::validate() const {
    if (dim == 0 || activation_dim == 0) throw InvalidArgument("synthetic config needs dim >= 1 and activation_dim >= 1");
    if (attribute.empty()) throw InvalidArgument("synthetic config needs an attribute name");
    if (subgroups.empty()) throw InvalidArgument("synthetic config needs at least one subgroup");
    std::set<std::string> labels;
    for (const auto& g : subgroups) {
        if (g.label.empty()) throw InvalidArgument("subgroup label must be non-empty");
        if (!labels.insert(g.label).second) throw InvalidArgument(fmt::format("duplicate subgroup '{}'", g.label));
        if (g.subject_count == 0 || g.images_per_subject == 0) {
            throw InvalidArgument(fmt::format("subgroup '{}' needs at least one subject and one image", g.label));
        }
        if (!(g.noise_scale >= 0.0) || !std::isfinite(g.noise_scale)) {
            throw InvalidArgument(fmt::format("subgroup '{}' has invalid noise scale {}", g.label, g.noise_scale));
        }
    }
}

nlohmann::ordered_json to_json(const SynthConfig& config) {
    nlohmann::ordered_json j;
    j["dim"] = config.dim;
    j["activation_dim"] = config.activation_dim;
    j["attribute"] = config.attribute;
    j["seed"] = config.seed;
    j["subgroups"] = nlohmann::ordered_json::array();
    for (const auto& g : config.subgroups) {
        j["subgroups"].push_back({{"label", g.label},
                                  {"subjects", g.subject_count},
                                  {"images_per_subject", g.images_per_subject},
                                  {"noise_scale", g.noise_scale}});
    }
    return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c = SynthConfig::default_biased();
    try {
        c.dim = j.value("dim", c.dim);
        c.activation_dim = j.value("activation_dim", c.activation_dim);
        c.attribute = j.value("attribute", c.attribute);
        c.seed = j.value("seed", c.seed);
        if (j.contains("subgroups")) {
            c.subgroups.clear();
            for (const auto& g : j.at("subgroups")) {
                c.subgroups.push_back({g.at("label").get<std::string>(), g.at("subjects").get<std::size_t>(),
                                       g.at("images_per_subject").get<std::size_t>(),
                                       g.at("noise_scale").get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed synthetic config: {}", e.what()));
    }
    c.validate();
    return c;
}

LastLayer make_last_layer(const SynthConfig& config) {
    const std::size_t h = config.activation_dim;
    const std::size_t d = config.dim;
    if (h < d) {
        throw InvalidArgument(fmt::format("cannot build {} orthonormal columns in {} dimensions (need H >= D)", d, h));
    }
    SplitMix64 rng(stream_seed(config.seed, kLayerStream));
    // Column-major work buffer: column c occupies cols[c*h .. c*h+h).
    std::vector<double> cols(h * d);
    for (double& x : cols) x = rng.gaussian();
    for (std::size_t c = 0; c < d; ++c) {
        double* v = cols.data() + c * h;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < c; ++p) {
                const double* u = cols.data() + p * h;
                double dot = 0.0;
                for (std::size_t k = 0; k < h; ++k) dot += u[k] * v[k];
                for (std::size_t k = 0; k < h; ++k) v[k] -= dot * u[k];
            }
        }
        double sq = 0.0;
        for (std::size_t k = 0; k < h; ++k) sq += v[k] * v[k];
        if (!(sq > 1e-20)) throw InvalidArgument("degenerate random matrix during orthogonalization");
        const double norm = std::sqrt(sq);
        for (std::size_t k = 0; k < h; ++k) v[k] /= norm;
    }
    LastLayer layer;
    layer.input_dim = h;
    layer.output_dim = d;
    layer.weights.resize(h * d);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < d; ++c) layer.weights[r * d + c] = cols[c * h + r];
    }
    layer.bias.assign(d, 0.0);
    layer.activation = Activation::identity;
    return layer;
}

SyntheticData generate(const SynthConfig& config) {
    config.validate();
    SyntheticData out;
    out.layer = make_last_layer(config);
    const std::size_t d = config.dim;
    const std::size_t h = config.activation_dim;

    std::size_t total = 0;
    for (const auto& g : config.subgroups) total += g.subject_count * g.images_per_subject;
    Dataset& ds = out.dataset;
    ds.attribute_names = {config.attribute};
    ds.embeddings = EmbeddingMatrix(total, d);
    ds.activations = EmbeddingMatrix(total, h);
    ds.records.reserve(total);
    out.noise_magnitude.reserve(total);

    std::size_t row = 0;
    for (std::size_t gi = 0; gi < config.subgroups.size(); ++gi) {
        const auto& group = config.subgroups[gi];
        const std::uint64_t group_seed = stream_seed(config.seed, gi + 1);
        for (std::size_t s = 0; s < group.subject_count; ++s) {
            const std::uint64_t subject_seed = stream_seed(group_seed, s);
            SplitMix64 subject_rng(subject_seed);
            const auto mean = unit_gaussian_direction(subject_rng, d);
            const std::string subject_id = fmt::format("{}_s{:03}", group.label, s);
            for (std::size_t t = 0; t < group.images_per_subject; ++t, ++row) {
                SplitMix64 rng(stream_seed(subject_seed, t + 1));
                std::vector<double> e(d);
                double noise_sq = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double g = rng.gaussian();
                    noise_sq += g * g;
                    e[k] = mean[k] + group.noise_scale * g;
                }
                const double noise = group.noise_scale * std::sqrt(noise_sq);
                double sq = 0.0;
                for (double x : e) sq += x * x;
                const double norm = std::sqrt(sq);
                // mean + noise can only vanish on a measure-zero event; fall back to the mean.
                for (std::size_t k = 0; k < d; ++k) e[k] = norm > 0.0 ? e[k] / norm : mean[k];

                auto emb = ds.embeddings.row(row);
                for (std::size_t k = 0; k < d; ++k) emb[k] = static_cast<float>(e[k]);
                auto act = ds.activations->row(row);
                for (std::size_t r = 0; r < h; ++r) {
                    double a = 0.0;
                    for (std::size_t k = 0; k < d; ++k) a += out.layer.weight(r, k) * e[k];
                    act[r] = static_cast<float>((1.0 + noise) * a);
                }

                SampleRecord rec;
                rec.image_id = fmt::format("{}_i{:02}", subject_id, t);
                rec.subject_id = subject_id;
                rec.attributes[config.attribute] = group.label;
                ds.records.push_back(std::move(rec));
                out.noise_magnitude.push_back(noise);
            }
        }
    }
    return out;
}

void write_synthetic(const SyntheticData& data, const SynthConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_dataset(data.dataset, dir / "metadata.csv", dir / "embeddings.fqbe", dir / "activations.fqbe");
    save_last_layer(dir / "last_layer.fqbe", data.layer);
    {
        std::ofstream out(dir / "truth.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(fmt::format("cannot write '{}'", (dir / "truth.csv").string()));
        csv::write_row(out, {"image_id", "noise_magnitude"});
        for (std::size_t i = 0; i < data.dataset.size(); ++i) {
            csv::write_row(out, {data.dataset.records[i].image_id, csv::format_double(data.noise_magnitude[i])});
        }
    }
    std::ofstream cfg(dir / "config.json", std::ios::trunc);
    if (!cfg) throw DataError(fmt::format("cannot write '{}'", (dir / "config.json").string()));
    cfg << to_json(config).dump(2) << '\n';
}

}  // namespace fqb
