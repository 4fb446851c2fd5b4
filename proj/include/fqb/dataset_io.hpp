#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "fqb/dataset.hpp"

namespace fqb {

// FQBE matrix files: ASCII magic "FQBE", u32 version (1), u64 rows, u64 cols,
// then rows*cols float32 values in row-major order. All integers and floats
// are little-endian regardless of host byte order.
inline constexpr std::uint32_t kFqbeVersion = 1;

EmbeddingMatrix read_fqbe(const std::filesystem::path& path);
void write_fqbe(const std::filesystem::path& path, const EmbeddingMatrix& matrix);

/// Loads metadata CSV (required columns image_id, subject_id; every other
/// column is an attribute, empty cells mean unlabeled) and the embedding
/// matrix, L2-normalizing each embedding row. Throws DataError on row-count
/// mismatch, malformed header, duplicate ids, non-finite values or zero rows.
Dataset load_dataset(const std::filesystem::path& meta_path, const std::filesystem::path& emb_path,
                     const std::optional<std::filesystem::path>& act_path = std::nullopt);

void save_dataset(const Dataset& dataset, const std::filesystem::path& meta_path,
                  const std::filesystem::path& emb_path,
                  const std::optional<std::filesystem::path>& act_path = std::nullopt);

/// Normalizes every row in place. Rows whose norm is already within 1e-6 of
/// one are left untouched, which makes save/load round trips bit-exact.
void normalize_rows(EmbeddingMatrix& matrix, const Dataset* context = nullptr);

/// Quality CSV with header image_id,score. Every dataset image must appear
/// exactly once; result is in dataset order.
QualityScores load_quality_csv(const std::filesystem::path& path, const Dataset& dataset,
                               std::string estimator_name);
void save_quality_csv(const std::filesystem::path& path, const Dataset& dataset,
                      const QualityScores& quality);

struct PairOptions {
    std::size_t impostor_cap_per_probe = 1000;
    std::uint64_t seed = 1;
    /// Drop impostor pairs whose unordered pair already appeared earlier.
    bool dedup_unordered = true;
};

/// Genuine pairs: every unordered within-subject pair (i < j). Impostor pairs:
/// for each probe in index order, up to `impostor_cap_per_probe` images from
/// other subjects sampled without replacement from a per-probe stream.
ComparisonSet generate_pairs(const Dataset& dataset, const PairOptions& options);

/// Pair file with header kind,probe_id,reference_id,score (kind is genuine or
/// impostor; score empty when unscored).
void save_pairs_csv(const std::filesystem::path& path, const Dataset& dataset, const ComparisonSet& pairs);
void write_pairs_csv(std::ostream& out, const Dataset& dataset, const ComparisonSet& pairs);
ComparisonSet load_pairs_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace fqb
