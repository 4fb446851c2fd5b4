#include "fqb/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/core.h>

#include "fqb/csv.hpp"
#include "fqb/error.hpp"
#include "fqb/parallel.hpp"
#include "fqb/rng.hpp"

namespace fqb {

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw InvalidArgument(fmt::format("matrix {}x{} needs {} values, got {}", rows_, cols_,
                                          rows_ * cols_, values_.size()));
    }
}

std::optional<std::size_t> Dataset::index_of(const std::string& image_id) const {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].image_id == image_id) return i;
    }
    return std::nullopt;
}

namespace {

constexpr std::array<char, 4> kMagic{'F', 'Q', 'B', 'E'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

template <class T>
void put_le(std::string& out, T value) {
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(p[b]) << (8 * b);
    return value;
}

std::unordered_map<std::string, std::size_t> id_index(const Dataset& dataset) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) index.emplace(dataset.records[i].image_id, i);
    return index;
}

}  // namespace

EmbeddingMatrix read_fqbe(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open matrix file '{}'", path.string()));
    std::array<unsigned char, kHeaderBytes> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
        throw DataError(fmt::format("{}: truncated FQBE header", path.string()));
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
        throw DataError(fmt::format("{}: bad magic, not an FQBE file", path.string()));
    }
    const auto version = get_le<std::uint32_t>(header.data() + 4);
    if (version != kFqbeVersion) {
        throw DataError(fmt::format("{}: unsupported FQBE version {}", path.string(), version));
    }
    const auto rows = get_le<std::uint64_t>(header.data() + 8);
    const auto cols = get_le<std::uint64_t>(header.data() + 16);
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
        throw DataError(fmt::format("{}: implausible shape {}x{}", path.string(), rows, cols));
    }
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    std::vector<unsigned char> bytes(count * 4);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw DataError(fmt::format("{}: truncated payload, expected {}x{} floats", path.string(), rows, cols));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError(fmt::format("{}: trailing bytes after {}x{} payload", path.string(), rows, cols));
    }
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + 4 * i));
        if (!std::isfinite(values[i])) {
            throw DataError(fmt::format("{}: non-finite value at row {}, column {}", path.string(),
                                        i / cols, i % cols));
        }
    }
    return EmbeddingMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(values));
}

void write_fqbe(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
    std::string buffer;
    buffer.reserve(kHeaderBytes + matrix.values().size() * 4);
    buffer.append(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(buffer, kFqbeVersion);
    put_le<std::uint64_t>(buffer, matrix.rows());
    put_le<std::uint64_t>(buffer, matrix.cols());
    for (float v : matrix.values()) put_le<std::uint32_t>(buffer, std::bit_cast<std::uint32_t>(v));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

void normalize_rows(EmbeddingMatrix& matrix, const Dataset* context) {
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        auto row = matrix.row(r);
        double sq = 0.0;
        for (float v : row) sq += static_cast<double>(v) * v;
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0)) {
            const std::string who = context && r < context->size() ? context->records[r].image_id
                                                                    : fmt::format("row {}", r);
            throw DataError(fmt::format("zero-norm embedding for {}", who));
        }
        if (std::abs(norm - 1.0) <= 1e-6) continue;
        for (float& v : row) v = static_cast<float>(v / norm);
    }
}

Dataset load_dataset(const std::filesystem::path& meta_path, const std::filesystem::path& emb_path,
                     const std::optional<std::filesystem::path>& act_path) {
    const csv::Table meta = csv::read(meta_path);
    const std::size_t id_col = meta.column("image_id");
    const std::size_t subject_col = meta.column("subject_id");
    if (id_col == csv::Table::npos || subject_col == csv::Table::npos) {
        throw DataError(fmt::format("{}: header must contain image_id and subject_id columns",
                                    meta_path.string()));
    }
    {
        std::set<std::string> seen;
        for (const auto& name : meta.header) {
            if (name.empty()) throw DataError(fmt::format("{}: empty column name in header", meta_path.string()));
            if (!seen.insert(name).second) {
                throw DataError(fmt::format("{}: duplicate column '{}'", meta_path.string(), name));
            }
        }
    }

    Dataset dataset;
    for (std::size_t c = 0; c < meta.header.size(); ++c) {
        if (c != id_col && c != subject_col) dataset.attribute_names.push_back(meta.header[c]);
    }
    std::unordered_set<std::string> ids;
    dataset.records.reserve(meta.rows.size());
    for (std::size_t r = 0; r < meta.rows.size(); ++r) {
        const auto& row = meta.rows[r];
        const auto where = fmt::format("{}:{}", meta_path.string(), meta.line_numbers[r]);
        SampleRecord rec;
        rec.image_id = row[id_col];
        rec.subject_id = row[subject_col];
        if (rec.image_id.empty()) throw DataError(where + ": empty image_id");
        if (rec.subject_id.empty()) throw DataError(where + ": empty subject_id");
        if (!ids.insert(rec.image_id).second) {
            throw DataError(fmt::format("{}: duplicate image_id '{}'", where, rec.image_id));
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == id_col || c == subject_col || row[c].empty()) continue;
            rec.attributes.emplace(meta.header[c], row[c]);
        }
        dataset.records.push_back(std::move(rec));
    }

    dataset.embeddings = read_fqbe(emb_path);
    if (dataset.embeddings.rows() != dataset.size()) {
        throw DataError(fmt::format("row count mismatch: {} has {} records but {} has {} rows",
                                    meta_path.string(), dataset.size(), emb_path.string(),
                                    dataset.embeddings.rows()));
    }
    normalize_rows(dataset.embeddings, &dataset);

    if (act_path) {
        dataset.activations = read_fqbe(*act_path);
        if (dataset.activations->rows() != dataset.size()) {
            throw DataError(fmt::format("row count mismatch: {} has {} records but {} has {} rows",
                                        meta_path.string(), dataset.size(), act_path->string(),
                                        dataset.activations->rows()));
        }
    }
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& meta_path,
                  const std::filesystem::path& emb_path, const std::optional<std::filesystem::path>& act_path) {
    std::ofstream out(meta_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", meta_path.string()));
    std::vector<std::string> header{"image_id", "subject_id"};
    header.insert(header.end(), dataset.attribute_names.begin(), dataset.attribute_names.end());
    csv::write_row(out, header);
    for (const auto& rec : dataset.records) {
        std::vector<std::string> row{rec.image_id, rec.subject_id};
        for (const auto& name : dataset.attribute_names) {
            const std::string* label = rec.attribute(name);
            row.push_back(label ? *label : std::string{});
        }
        csv::write_row(out, row);
    }
    out.close();
    write_fqbe(emb_path, dataset.embeddings);
    if (act_path) {
        if (!dataset.activations) throw InvalidArgument("dataset has no activations to save");
        write_fqbe(*act_path, *dataset.activations);
    }
}

QualityScores load_quality_csv(const std::filesystem::path& path, const Dataset& dataset,
                               std::string estimator_name) {
    const csv::Table table = csv::read(path);
    const std::size_t id_col = table.column("image_id");
    const std::size_t score_col = table.column("score");
    if (id_col == csv::Table::npos || score_col == csv::Table::npos) {
        throw DataError(fmt::format("{}: header must contain image_id and score columns", path.string()));
    }
    const auto index = id_index(dataset);
    std::vector<std::optional<double>> slots(dataset.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto where = fmt::format("{}:{}", path.string(), table.line_numbers[r]);
        const std::string& id = table.rows[r][id_col];
        auto it = index.find(id);
        if (it == index.end()) throw DataError(fmt::format("{}: unknown image_id '{}'", where, id));
        if (slots[it->second]) throw DataError(fmt::format("{}: duplicate image_id '{}'", where, id));
        const double v = csv::parse_double(table.rows[r][score_col], where);
        if (!std::isfinite(v)) throw DataError(fmt::format("{}: non-finite score for '{}'", where, id));
        slots[it->second] = v;
    }
    QualityScores scores{std::move(estimator_name), {}};
    scores.values.reserve(dataset.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i]) {
            throw DataError(fmt::format("{}: missing image_id '{}'", path.string(), dataset.records[i].image_id));
        }
        scores.values.push_back(*slots[i]);
    }
    return scores;
}

void save_quality_csv(const std::filesystem::path& path, const Dataset& dataset, const QualityScores& quality) {
    if (quality.values.size() != dataset.size()) {
        throw InvalidArgument(fmt::format("quality has {} values for {} images", quality.values.size(),
                                          dataset.size()));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    csv::write_row(out, {"image_id", "score"});
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        csv::write_row(out, {dataset.records[i].image_id, csv::format_double(quality.values[i])});
    }
}

ComparisonSet generate_pairs(const Dataset& dataset, const PairOptions& options) {
    if (options.impostor_cap_per_probe == 0) throw InvalidArgument("impostor cap per probe must be positive");
    const std::size_t n = dataset.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("dataset too large for pair indices");

    // Image indices grouped by subject, each group ascending.
    std::map<std::string, std::vector<std::uint32_t>> by_subject;
    for (std::uint32_t i = 0; i < n; ++i) by_subject[dataset.records[i].subject_id].push_back(i);

    ComparisonSet set;
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j : by_subject[dataset.records[i].subject_id]) {
            if (j > i) set.genuine_pairs.push_back({i, j});
        }
    }
    if (set.genuine_pairs.empty()) throw DataError("no genuine pairs possible: every subject has a single image");
    if (by_subject.size() < 2) throw DataError("no impostor pairs possible: dataset has a single subject");

    std::vector<std::vector<std::uint32_t>> sampled(n);
    parallel_for(n, [&](std::size_t probe) {
        const auto& own = by_subject.at(dataset.records[probe].subject_id);
        const std::size_t pool = n - own.size();
        const std::size_t take = std::min(options.impostor_cap_per_probe, pool);
        // p-th index (0-based) of [0, n) skipping the probe's own subject.
        auto to_global = [&own](std::size_t p) {
            std::size_t g = p;
            for (std::uint32_t o : own) {
                if (o <= g) ++g;
                else break;
            }
            return static_cast<std::uint32_t>(g);
        };
        // Partial Fisher-Yates over the virtual candidate array.
        SplitMix64 rng(stream_seed(options.seed, probe));
        std::unordered_map<std::size_t, std::size_t> moved;
        auto at = [&moved](std::size_t pos) {
            auto it = moved.find(pos);
            return it == moved.end() ? pos : it->second;
        };
        auto& out = sampled[probe];
        out.reserve(take);
        for (std::size_t t = 0; t < take; ++t) {
            const std::size_t r = t + static_cast<std::size_t>(rng.below(pool - t));
            const std::size_t picked = at(r);
            moved[r] = at(t);
            out.push_back(to_global(picked));
        }
    });

    std::unordered_set<std::uint64_t> seen;
    for (std::uint32_t probe = 0; probe < n; ++probe) {
        for (std::uint32_t ref : sampled[probe]) {
            if (options.dedup_unordered) {
                const std::uint64_t key = (std::uint64_t{std::min(probe, ref)} << 32) | std::max(probe, ref);
                if (!seen.insert(key).second) continue;
            }
            set.impostor_pairs.push_back({probe, ref});
        }
    }
    return set;
}

void save_pairs_csv(const std::filesystem::path& path, const Dataset& dataset, const ComparisonSet& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    write_pairs_csv(out, dataset, pairs);
}

void write_pairs_csv(std::ostream& out, const Dataset& dataset, const ComparisonSet& pairs) {
    csv::write_row(out, {"kind", "probe_id", "reference_id", "score"});
    auto emit = [&](const char* kind, const std::vector<IndexPair>& list, const std::vector<float>& scores) {
        for (std::size_t k = 0; k < list.size(); ++k) {
            csv::write_row(out, {kind, dataset.records.at(list[k].probe).image_id,
                                 dataset.records.at(list[k].reference).image_id,
                                 k < scores.size() ? csv::format_float(scores[k]) : std::string{}});
        }
    };
    emit("genuine", pairs.genuine_pairs, pairs.genuine_scores);
    emit("impostor", pairs.impostor_pairs, pairs.impostor_scores);
}

ComparisonSet load_pairs_csv(const std::filesystem::path& path, const Dataset& dataset) {
    const csv::Table table = csv::read(path);
    const std::size_t kind_col = table.column("kind");
    const std::size_t probe_col = table.column("probe_id");
    const std::size_t ref_col = table.column("reference_id");
    const std::size_t score_col = table.column("score");
    if (kind_col == csv::Table::npos || probe_col == csv::Table::npos || ref_col == csv::Table::npos ||
        score_col == csv::Table::npos) {
        throw DataError(fmt::format("{}: header must be kind,probe_id,reference_id,score", path.string()));
    }
    const auto index = id_index(dataset);
    ComparisonSet set;
    std::unordered_set<std::uint64_t> seen;
    std::size_t with_score = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = fmt::format("{}:{}", path.string(), table.line_numbers[r]);
        auto lookup = [&](const std::string& id) {
            auto it = index.find(id);
            if (it == index.end()) throw DataError(fmt::format("{}: unknown image_id '{}'", where, id));
            return static_cast<std::uint32_t>(it->second);
        };
        const IndexPair pair{lookup(row[probe_col]), lookup(row[ref_col])};
        if (pair.probe == pair.reference) throw DataError(where + ": pair compares an image with itself");
        const bool same = dataset.records[pair.probe].subject_id == dataset.records[pair.reference].subject_id;
        const bool genuine = row[kind_col] == "genuine";
        if (!genuine && row[kind_col] != "impostor") {
            throw DataError(fmt::format("{}: kind must be genuine or impostor, got '{}'", where, row[kind_col]));
        }
        if (genuine != same) {
            throw DataError(fmt::format("{}: {} pair with {} subjects", where, row[kind_col],
                                        same ? "identical" : "different"));
        }
        const std::uint64_t key = (std::uint64_t{std::min(pair.probe, pair.reference)} << 32) |
                                  std::max(pair.probe, pair.reference);
        if (!seen.insert(key).second) throw DataError(where + ": duplicate unordered pair");
        (genuine ? set.genuine_pairs : set.impostor_pairs).push_back(pair);
        if (!row[score_col].empty()) {
            ++with_score;
            (genuine ? set.genuine_scores : set.impostor_scores)
                .push_back(static_cast<float>(csv::parse_double(row[score_col], where)));
        }
    }
    if (with_score != 0 && with_score != table.rows.size()) {
        throw DataError(fmt::format("{}: either every pair or no pair may carry a score", path.string()));
    }
    return set;
}

}  // namespace fqb
