#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fqb {

/// One image's identity and categorical attributes (pose, ethnicity, age
/// class, ...). An attribute absent from the map is unlabeled for that image.
struct SampleRecord {
    std::string image_id;
    std::string subject_id;
    std::map<std::string, std::string> attributes;

    const std::string* attribute(const std::string& name) const {
        auto it = attributes.find(name);
        return it == attributes.end() ? nullptr : &it->second;
    }
};

/// Dense row-major float32 matrix.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}
    EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const float> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
    std::span<float> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

    float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

    const std::vector<float>& values() const noexcept { return values_; }

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> values_;
};

/// Records and embedding rows are index-aligned. Embeddings are unit-norm once
/// loaded; activations (optional, pre-last-layer, used by SER-FIQ) are raw.
struct Dataset {
    std::vector<SampleRecord> records;
    /// Attribute columns in metadata order.
    std::vector<std::string> attribute_names;
    EmbeddingMatrix embeddings;
    std::optional<EmbeddingMatrix> activations;

    std::size_t size() const noexcept { return records.size(); }
    std::optional<std::size_t> index_of(const std::string& image_id) const;
};

struct IndexPair {
    std::uint32_t probe = 0;
    std::uint32_t reference = 0;
    friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Genuine and impostor comparisons. Score vectors are empty until scored,
/// then hold one cosine similarity per pair in pair order.
struct ComparisonSet {
    std::vector<IndexPair> genuine_pairs;
    std::vector<IndexPair> impostor_pairs;
    std::vector<float> genuine_scores;
    std::vector<float> impostor_scores;

    bool scored() const noexcept {
        return genuine_scores.size() == genuine_pairs.size() &&
               impostor_scores.size() == impostor_pairs.size();
    }
    friend bool operator==(const ComparisonSet&, const ComparisonSet&) = default;
};

/// Per-image scalar quality from one estimator, aligned to dataset order.
/// Higher means more useful for recognition.
struct QualityScores {
    std::string estimator_name;
    std::vector<double> values;
};

}  // namespace fqb
