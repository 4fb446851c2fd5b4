#pragma once

// Test fixtures and independent reference computations. Nothing here calls
// the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fqb/dataset.hpp"

namespace fqb::test {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "fqb_test_XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

/// In-memory dataset from (subject, label) per image and raw embedding rows.
inline Dataset make_dataset(const std::vector<std::pair<std::string, std::string>>& subject_label,
                            const std::vector<std::vector<float>>& rows, const std::string& attribute = "group") {
    Dataset ds;
    ds.attribute_names = {attribute};
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    std::vector<float> flat;
    for (std::size_t i = 0; i < subject_label.size(); ++i) {
        SampleRecord rec;
        rec.image_id = "img" + std::to_string(i);
        rec.subject_id = subject_label[i].first;
        rec.attributes[attribute] = subject_label[i].second;
        ds.records.push_back(rec);
        flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    ds.embeddings = EmbeddingMatrix(rows.size(), d, flat);
    return ds;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// SplitMix64 written out from its published definition.
struct ReferenceSplitMix {
    std::uint64_t x;
    std::uint64_t next() {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return std::ldexp(static_cast<double>(next() >> 11), -53); }
};

/// Exhaustive scan: every distinct impostor value plus the float above the
/// maximum is a candidate; FMR counted by linear scan; smallest admissible wins.
struct OracleThreshold {
    float threshold;
    double fmr;
};
inline OracleThreshold oracle_threshold(const std::vector<float>& impostors, double target) {
    std::set<float> candidates(impostors.begin(), impostors.end());
    candidates.insert(std::nextafter(*candidates.rbegin(), std::numeric_limits<float>::infinity()));
    OracleThreshold best{std::numeric_limits<float>::infinity(), 0.0};
    for (float t : candidates) {
        std::size_t count = 0;
        for (float s : impostors) count += s >= t ? 1 : 0;
        const double fmr = static_cast<double>(count) / static_cast<double>(impostors.size());
        if (fmr <= target && t < best.threshold) best = {t, fmr};
    }
    return best;
}

/// q = 2 / (1 + exp((2/m^2) * sum_{i<j} d_ij)), brute force double loop.
inline double oracle_serfiq(const std::vector<std::vector<double>>& x) {
    const double m = static_cast<double>(x.size());
    long double total = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j <= i) continue;
            long double sq = 0.0L;
            for (std::size_t k = 0; k < x[i].size(); ++k) {
                const long double d = static_cast<long double>(x[i][k]) - x[j][k];
                sq += d * d;
            }
            total += std::sqrt(sq);
        }
    }
    return static_cast<double>(2.0L / (1.0L + std::exp(2.0L / (m * m) * total)));
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> oracle_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t c = n; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return x;
}

/// Ordinary least squares with intercept via normal equations on [1, x].
/// Returns {intercept, w_1..w_D} in raw feature units.
inline std::vector<double> oracle_ols(const std::vector<std::vector<double>>& x, const std::vector<double>& z,
                                      double ridge = 0.0) {
    const std::size_t d = x.front().size() + 1;
    std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
    std::vector<double> b(d, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> row{1.0};
        row.insert(row.end(), x[i].begin(), x[i].end());
        for (std::size_t r = 0; r < d; ++r) {
            b[r] += row[r] * z[i];
            for (std::size_t c = 0; c < d; ++c) a[r][c] += row[r] * row[c];
        }
    }
    for (std::size_t r = 1; r < d; ++r) a[r][r] += ridge;
    return oracle_solve(a, b);
}

}  // namespace fqb::test
