#include "fqb/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "fqb/bias_analysis.hpp"
#include "fqb/csv.hpp"
#include "fqb/dataset_io.hpp"
#include "fqb/error.hpp"
#include "fqb/quality_bestrowden.hpp"
#include "fqb/quality_serfiq.hpp"
#include "fqb/report.hpp"
#include "fqb/synthetic.hpp"
#include "fqb/verification.hpp"

namespace fs = std::filesystem;

namespace fqb::cli {

namespace {

/// CLI11 config reader for JSON run configurations. Nested objects address
/// subcommands: {"report": {"fmr": [0.001]}, "seed": 7}.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("run config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("run config must be a JSON object");
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("unsupported value in run config: " + v.dump());
    }

    static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it->is_object()) {
                auto nested = parents;
                nested.push_back(it.key());
                flatten(*it, nested, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it->is_array()) {
                for (const auto& v : *it) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(*it));
            }
            items.push_back(std::move(item));
        }
    }
};

struct DataDir {
    fs::path dir;
    fs::path meta() const { return dir / "metadata.csv"; }
    fs::path embeddings() const { return dir / "embeddings.fqbe"; }
    fs::path activations() const { return dir / "activations.fqbe"; }
    fs::path layer() const { return dir / "last_layer.fqbe"; }
};

Dataset load_data(const DataDir& data, bool require_activations) {
    std::optional<fs::path> act;
    if (fs::exists(data.activations())) {
        act = data.activations();
    } else if (require_activations) {
        throw DataError(fmt::format("missing activation matrix '{}' (needed for SER-FIQ)", data.activations().string()));
    }
    return load_dataset(data.meta(), data.embeddings(), act);
}

/// Scored comparisons: from --pairs when given (scored on load if the file
/// carries no scores), otherwise generated from cap and seed.
ComparisonSet load_or_generate_pairs(const Dataset& dataset, const std::string& pairs_path, std::size_t cap,
                                     std::uint64_t seed) {
    if (!pairs_path.empty()) {
        ComparisonSet set = load_pairs_csv(pairs_path, dataset);
        if (set.genuine_scores.empty() && set.impostor_scores.empty()) set = score_pairs(dataset, std::move(set));
        return set;
    }
    return score_pairs(dataset, generate_pairs(dataset, {cap, seed, true}));
}

template <class Writer>
void emit(const std::string& path, std::ostream& out, Writer&& writer) {
    if (path.empty() || path == "-") {
        writer(out);
        return;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError(fmt::format("cannot write '{}'", path));
    writer(file);
}

ThresholdMode parse_mode(const std::string& s) {
    return s == "per_subgroup" ? ThresholdMode::per_subgroup : ThresholdMode::global;
}

std::string estimator_from_path(const std::string& name, const std::string& path) {
    return name.empty() ? fs::path(path).stem().string() : name;
}

const char* kFormats = R"(
Data directory (--data) layout:
  metadata.csv      UTF-8 CSV; columns image_id,subject_id plus one column per attribute
  embeddings.fqbe   FQBE matrix, one row per metadata row (L2-normalized on load)
  activations.fqbe  optional FQBE matrix of pre-last-layer activations (SER-FIQ input)
  last_layer.fqbe   optional H x D last-layer weights, sidecar last_layer.json
                    {"activation": "identity"|"tanh", "bias": [...]}
FQBE: "FQBE", u32 version=1, u64 rows, u64 cols, rows*cols float32, all little-endian.
Quality CSV: image_id,score.  Pairs CSV: kind,probe_id,reference_id,score.
Match rule: score >= threshold.)";

struct Options {
    // shared
    std::string data;
    std::string out;
    std::string pairs;
    std::size_t cap = 1000;
    std::vector<double> fmr{0.001, 0.01};
    std::string attribute;
    std::vector<std::string> attributes;
    std::string quality;
    std::string name;
    // synth
    std::string synth_config;
    // serfiq
    std::string layer;
    std::size_t m = 100;
    double dropout = 0.5;
    bool normalize = false;
    // bestrowden
    std::string model;
    std::vector<double> lambda_grid = default_lambda_grid();
    std::size_t folds = 5;
    std::string aggregate = "mean";
    std::string labels_out;
    // analyses
    std::string format = "csv";
    std::string threshold_mode = "global";
    std::vector<double> grid = default_reject_grid();
    bool rederive = false;
    std::size_t points = 100;
    std::size_t bins = 50;
    std::string summary_out;
    std::vector<std::string> estimators;
    std::vector<std::string> external;
};

RegressorModel train_from_data(const Dataset& dataset, const ComparisonSet& scored, const Options& o,
                               std::uint64_t seed, LabelSet* labels_out = nullptr) {
    const auto aggregate = o.aggregate == "max" ? GenuineAggregate::max : GenuineAggregate::mean;
    LabelSet labels = quality_labels(dataset, scored, aggregate);
    TrainOptions train;
    train.lambda_grid = o.lambda_grid;
    train.folds = o.folds;
    train.seed = seed;
    RegressorModel model = train_regressor(gather_features(dataset, labels), gather_labels(labels), train);
    if (labels_out) *labels_out = std::move(labels);
    return model;
}

QualityScores serfiq_from_data(const Dataset& dataset, const DataDir& dir, const Options& o, std::uint64_t seed) {
    const fs::path layer_path = o.layer.empty() ? dir.layer() : fs::path(o.layer);
    if (!fs::exists(layer_path)) throw DataError(fmt::format("missing last-layer matrix '{}'", layer_path.string()));
    const LastLayer layer = load_last_layer(layer_path);
    return serfiq_dataset(dataset, layer, {o.m, o.dropout, seed, o.normalize});
}

void add_pair_flags(CLI::App* sub, Options& o) {
    sub->add_option("--pairs", o.pairs, "Pairs CSV from `pairs`; generated from --cap/--seed when omitted");
    sub->add_option("--cap", o.cap, "Impostor comparisons sampled per probe image")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

void add_fmr_flag(CLI::App* sub, Options& o) {
    sub->add_option("--fmr", o.fmr, "Target false match rates, comma separated")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0).description("in (0,1)"));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Face image quality and recognition bias toolkit", "fqb"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--run-config", "", "JSON run configuration; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(kFormats);

    Options o;
    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "Seed for every random choice (pair sampling, dropout masks, CV folds)")
        ->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic biased embedding dataset");
    synth->add_option("--config", o.synth_config,
                      "Synthetic config JSON {dim, activation_dim, attribute, seed, subgroups:[{label, subjects, "
                      "images_per_subject, noise_scale}]}; default: clean/noisy two-subgroup set")
        ->check(CLI::ExistingFile);
    synth->add_option("--out", o.out, "Output data directory")->required();
    synth->footer("--seed, when given, replaces the config seed.\n"
                  "Writes metadata.csv, embeddings.fqbe, activations.fqbe, last_layer.fqbe/.json, truth.csv "
                  "(image_id,noise_magnitude), config.json.");

    auto* pairs = app.add_subcommand("pairs", "Build and score genuine/impostor comparison pairs");
    pairs->add_option("--data", o.data, "Data directory")->required();
    pairs->add_option("--out", o.out, "Output pairs CSV (kind,probe_id,reference_id,score); stdout when omitted");
    pairs->add_option("--cap", o.cap, "Impostor comparisons sampled per probe image")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* quality = app.add_subcommand("quality", "Compute per-image quality scores (writes image_id,score CSV)");
    quality->require_subcommand(1);
    auto* q_serfiq = quality->add_subcommand("serfiq", "Stochastic-embedding robustness quality");
    q_serfiq->add_option("--data", o.data, "Data directory (needs activations.fqbe)")->required();
    q_serfiq->add_option("--out", o.out, "Output quality CSV; stdout when omitted");
    q_serfiq->add_option("--layer", o.layer, "Last-layer FQBE file (default <data>/last_layer.fqbe)");
    q_serfiq->add_option("--m", o.m, "Number of dropout patterns")->capture_default_str()->check(CLI::Range(2, 100000));
    q_serfiq->add_option("--dropout", o.dropout, "Dropout rate in (0,1)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    q_serfiq->add_flag("--normalize", o.normalize, "L2-normalize stochastic embeddings before distances");

    auto* q_best = quality->add_subcommand("bestrowden", "Comparison-score regressor quality");
    q_best->add_option("--data", o.data, "Data directory")->required();
    q_best->add_option("--out", o.out, "Output quality CSV; stdout when omitted");
    q_best->add_option("--model", o.model, "Model JSON from train-quality; trained on --data when omitted");
    add_pair_flags(q_best, o);
    q_best->add_option("--lambda-grid", o.lambda_grid, "Ridge strengths for cross-validation")->delimiter(',');
    q_best->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));

    auto* q_ext = quality->add_subcommand("external", "Ingest quality scores from an external estimator");
    q_ext->add_option("--data", o.data, "Data directory")->required();
    q_ext->add_option("--in", o.quality, "Input CSV image_id,score")->required()->check(CLI::ExistingFile);
    q_ext->add_option("--name", o.name, "Estimator name (default: input file stem)");
    q_ext->add_option("--out", o.out, "Output quality CSV in dataset order; stdout when omitted");

    auto* train = app.add_subcommand("train-quality", "Fit the comparison-score quality regressor");
    train->add_option("--data", o.data, "Data directory")->required();
    train->add_option("--out", o.out, "Output model JSON")->required();
    add_pair_flags(train, o);
    train->add_option("--lambda-grid", o.lambda_grid, "Ridge strengths for cross-validation")->delimiter(',');
    train->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    train->add_option("--aggregate", o.aggregate, "Genuine score aggregation per image")
        ->capture_default_str()
        ->check(CLI::IsMember({"mean", "max"}));
    train->add_option("--labels-out", o.labels_out,
                      "Optional CSV of labels image_id,z,genuine_mean,impostor_mean,impostor_std");

    auto* table = app.add_subcommand("fnmr-table", "FNMR at fixed FMR per subgroup of an attribute");
    table->add_option("--data", o.data, "Data directory")->required();
    table->add_option("--attribute", o.attribute, "Attribute column to stratify by")->required();
    table->add_option("--out", o.out, "Output file; stdout when omitted");
    table->add_option("--format", o.format, "csv (attribute,label,fmr_target,threshold,fnmr,genuine_count,"
                                            "impostor_count), json, or table (\"Label & 0.40% & 0.00%\")")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "json", "table"}));
    table->add_option("--threshold-mode", o.threshold_mode, "global or per_subgroup thresholds")
        ->capture_default_str()
        ->check(CLI::IsMember({"global", "per_subgroup"}));
    add_pair_flags(table, o);
    add_fmr_flag(table, o);

    auto* erc = app.add_subcommand("erc", "Error-versus-reject curve (reject_ratio,fnmr,remaining_genuine)");
    erc->add_option("--data", o.data, "Data directory")->required();
    erc->add_option("--quality", o.quality, "Quality CSV image_id,score")->required()->check(CLI::ExistingFile);
    erc->add_option("--out", o.out, "Output CSV; stdout when omitted");
    erc->add_option("--fmr", o.fmr, "Target false match rate for the fixed threshold")
        ->expected(1)
        ->check(CLI::Range(0.0, 1.0));
    erc->add_option("--grid", o.grid, "Reject ratios in [0,1), comma separated (default 0,0.01,...,0.5)")
        ->delimiter(',');
    erc->add_flag("--rederive", o.rederive, "Re-derive the threshold on surviving impostors at each point");
    add_pair_flags(erc, o);

    auto* prop = app.add_subcommand(
        "proportions",
        "Subgroup shares over quality quantile thresholds "
        "(threshold_quantile,threshold_value,label,fraction,remaining_total)");
    prop->add_option("--data", o.data, "Data directory")->required();
    prop->add_option("--quality", o.quality, "Quality CSV image_id,score")->required()->check(CLI::ExistingFile);
    prop->add_option("--attribute", o.attribute, "Attribute column")->required();
    prop->add_option("--points", o.points, "Number of quantile thresholds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    prop->add_option("--out", o.out, "Output CSV; stdout when omitted");

    auto* dist = app.add_subcommand("distributions",
                                    "Per-subgroup quality histograms (label,bin,bin_low,bin_high,mass)");
    dist->add_option("--data", o.data, "Data directory")->required();
    dist->add_option("--quality", o.quality, "Quality CSV image_id,score")->required()->check(CLI::ExistingFile);
    dist->add_option("--attribute", o.attribute, "Attribute column")->required();
    dist->add_option("--bins", o.bins, "Equal-width bins over the pooled range")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    dist->add_option("--out", o.out, "Output CSV; stdout when omitted");
    dist->add_option("--summary-out", o.summary_out, "Optional JSON with medians and pairwise overlap");

    auto* report = app.add_subcommand("report", "Full bias report for every estimator and attribute");
    report->add_option("--data", o.data, "Data directory")->required();
    report->add_option("--out", o.out, "Output directory")->required();
    report->add_option("--estimators", o.estimators,
                       "Built-in estimators: serfiq, bestrowden (default: serfiq when activations and "
                       "last_layer.fqbe exist, plus bestrowden)")
        ->delimiter(',')
        ->check(CLI::IsMember({"serfiq", "bestrowden"}));
    report->add_option("--quality", o.external, "External estimator NAME=PATH (quality CSV), repeatable");
    report->add_option("--attributes", o.attributes, "Attributes to analyse (default: all columns)")->delimiter(',');
    report->add_option("--grid", o.grid, "ERC reject ratios")->delimiter(',');
    report->add_option("--points", o.points, "Proportion-curve thresholds")->capture_default_str();
    report->add_option("--bins", o.bins, "Histogram bins")->capture_default_str();
    report->add_option("--threshold-mode", o.threshold_mode, "global or per_subgroup")
        ->capture_default_str()
        ->check(CLI::IsMember({"global", "per_subgroup"}));
    report->add_flag("--rederive", o.rederive, "Re-derive ERC thresholds at each reject ratio");
    report->add_option("--m", o.m, "SER-FIQ dropout patterns")->capture_default_str()->check(CLI::Range(2, 100000));
    report->add_option("--dropout", o.dropout, "SER-FIQ dropout rate")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    report->add_option("--lambda-grid", o.lambda_grid, "Ridge strengths")->delimiter(',');
    report->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    add_pair_flags(report, o);
    add_fmr_flag(report, o);
    report->footer("Writes <out>/<estimator>/<attribute>/{fnmr_table.csv, erc_fmr<target>.csv, proportions.csv, "
                   "distributions.csv, summary.json}.");

    // Every subcommand's help lists the global flags and the file formats.
    std::vector<CLI::App*> pending = app.get_subcommands({});
    while (!pending.empty()) {
        CLI::App* sub = pending.back();
        pending.pop_back();
        if (!sub->get_subcommands({}).empty()) {
            for (CLI::App* nested : sub->get_subcommands({})) pending.push_back(nested);
            continue;
        }
        sub->footer(sub->get_footer() + "\nGlobal options (before or after the subcommand): --seed N (default 1), "
                                        "--run-config FILE.json");
    }

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        if (!rev.empty()) rev.pop_back();  // program name
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const DataDir dir{o.data};
        if (synth->parsed()) {
            SynthConfig config = SynthConfig::default_biased();
            if (!o.synth_config.empty()) {
                std::ifstream in(o.synth_config);
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(in);
                } catch (const nlohmann::json::exception& e) {
                    throw DataError(fmt::format("{}: {}", o.synth_config, e.what()));
                }
                config = synth_config_from_json(j);
            }
            if (app.count("--seed") > 0) config.seed = seed;
            write_synthetic(generate(config), config, o.out);
            out << fmt::format("wrote synthetic dataset to {}\n", o.out);
        } else if (pairs->parsed()) {
            const Dataset ds = load_data(dir, false);
            const ComparisonSet set = score_pairs(ds, generate_pairs(ds, {o.cap, seed, true}));
            emit(o.out, out, [&](std::ostream& s) { write_pairs_csv(s, ds, set); });
        } else if (quality->parsed()) {
            QualityScores scores;
            Dataset ds;
            if (q_serfiq->parsed()) {
                ds = load_data(dir, true);
                scores = serfiq_from_data(ds, dir, o, seed);
            } else if (q_best->parsed()) {
                ds = load_data(dir, false);
                const RegressorModel model =
                    o.model.empty() ? train_from_data(ds, load_or_generate_pairs(ds, o.pairs, o.cap, seed), o, seed)
                                    : load_model(o.model);
                scores = predict_quality(model, ds);
            } else {
                ds = load_data(dir, false);
                scores = load_quality_csv(o.quality, ds, estimator_from_path(o.name, o.quality));
            }
            emit(o.out, out, [&](std::ostream& s) {
                s << "image_id,score\n";
                for (std::size_t i = 0; i < ds.size(); ++i) {
                    s << csv::escape(ds.records[i].image_id) << ',' << csv::format_double(scores.values[i]) << '\n';
                }
            });
        } else if (train->parsed()) {
            const Dataset ds = load_data(dir, false);
            LabelSet labels;
            const RegressorModel model =
                train_from_data(ds, load_or_generate_pairs(ds, o.pairs, o.cap, seed), o, seed, &labels);
            save_model(o.out, model);
            if (!o.labels_out.empty()) {
                emit(o.labels_out, out, [&](std::ostream& s) {
                    csv::write_row(s, {"image_id", "z", "genuine_mean", "impostor_mean", "impostor_std"});
                    for (const auto& l : labels.labels) {
                        csv::write_row(s, {ds.records[l.image_index].image_id, csv::format_double(l.z),
                                           csv::format_double(l.genuine_mean), csv::format_double(l.impostor_mean),
                                           csv::format_double(l.impostor_std)});
                    }
                });
            }
            out << fmt::format("trained on {} labeled images ({} omitted), lambda={}\n", labels.labels.size(),
                               labels.omitted.size(), csv::format_double(model.lambda));
        } else if (table->parsed()) {
            const Dataset ds = load_data(dir, false);
            const ComparisonSet scored = load_or_generate_pairs(ds, o.pairs, o.cap, seed);
            const auto rep = subgroup_fnmr_table(ds, scored, o.attribute, o.fmr, parse_mode(o.threshold_mode));
            emit(o.out, out, [&](std::ostream& s) {
                if (o.format == "json") s << to_json(rep).dump(2) << '\n';
                else if (o.format == "table") s << render_table(rep);
                else write_report_csv(s, rep);
            });
        } else if (erc->parsed()) {
            const Dataset ds = load_data(dir, false);
            const ComparisonSet scored = load_or_generate_pairs(ds, o.pairs, o.cap, seed);
            const QualityScores q = load_quality_csv(o.quality, ds, estimator_from_path(o.name, o.quality));
            const double target = erc->count("--fmr") ? o.fmr.front() : 0.001;
            const auto curve = error_vs_reject(scored, q, target, o.grid, {o.rederive});
            emit(o.out, out, [&](std::ostream& s) { write_erc_csv(s, curve); });
        } else if (prop->parsed()) {
            const Dataset ds = load_data(dir, false);
            const QualityScores q = load_quality_csv(o.quality, ds, estimator_from_path(o.name, o.quality));
            const auto curve = proportion_vs_threshold(ds, q, o.attribute, o.points);
            emit(o.out, out, [&](std::ostream& s) { write_proportions_csv(s, curve); });
        } else if (dist->parsed()) {
            const Dataset ds = load_data(dir, false);
            const QualityScores q = load_quality_csv(o.quality, ds, estimator_from_path(o.name, o.quality));
            const auto summary = quality_distributions(ds, q, o.attribute, o.bins);
            emit(o.out, out, [&](std::ostream& s) { write_distributions_csv(s, summary); });
            if (!o.summary_out.empty()) {
                nlohmann::ordered_json j;
                j["attribute"] = summary.attribute;
                j["medians"] = summary.medians;
                j["overlap"] = nlohmann::ordered_json::array();
                for (const auto& [key, v] : summary.overlap) {
                    if (key.first < key.second) j["overlap"].push_back({{"a", key.first}, {"b", key.second}, {"overlap", v}});
                }
                emit(o.summary_out, out, [&](std::ostream& s) { s << j.dump(2) << '\n'; });
            }
        } else if (report->parsed()) {
            const Dataset ds = load_data(dir, false);
            const ComparisonSet scored = load_or_generate_pairs(ds, o.pairs, o.cap, seed);
            std::vector<std::string> builtin = o.estimators;
            if (builtin.empty() && o.external.empty()) {
                if (ds.activations && fs::exists(dir.layer())) builtin.push_back("serfiq");
                builtin.push_back("bestrowden");
            }
            std::vector<QualityScores> sets;
            for (const auto& name : builtin) {
                if (name == "serfiq") {
                    if (!ds.activations) {
                        throw DataError(fmt::format("missing activation matrix '{}' (needed for SER-FIQ)",
                                                    dir.activations().string()));
                    }
                    sets.push_back(serfiq_from_data(ds, dir, o, seed));
                } else {
                    sets.push_back(predict_quality(train_from_data(ds, scored, o, seed), ds));
                }
            }
            for (const auto& entry : o.external) {
                const auto eq = entry.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw InvalidArgument(fmt::format("--quality expects NAME=PATH, got '{}'", entry));
                }
                sets.push_back(load_quality_csv(entry.substr(eq + 1), ds, entry.substr(0, eq)));
            }
            ReportOptions ro;
            ro.attributes = o.attributes;
            ro.fmr_targets = o.fmr;
            ro.reject_grid = o.grid;
            ro.proportion_points = o.points;
            ro.bins = o.bins;
            ro.threshold_mode = parse_mode(o.threshold_mode);
            ro.rederive_erc_threshold = o.rederive;
            write_report(bias_report(ds, scored, sets, ro), o.out);
            out << fmt::format("wrote report for {} estimator(s) to {}\n", sets.size(), o.out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace fqb::cli
