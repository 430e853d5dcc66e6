// Copyright 2026-present the navis authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "navis/core.hpp"

namespace navis {

using PqCode = std::vector<std::uint8_t>;

/// Product-quantization codebook: m subspaces, 256 centroids each.
/// Immutable after training; shared read-only between workers.
struct PqCodebook {
    static constexpr std::uint32_t kCentroids = 256;

    std::uint32_t dim = 0;
    std::uint32_t m = 0;
    std::uint32_t sub_dim = 0;
    // Subspace-major, centroid-major, coordinate-major.
    std::vector<float> centroids;

    const float* centroid(std::uint32_t subspace, std::uint32_t index) const {
        return centroids.data() + (static_cast<std::size_t>(subspace) * kCentroids + index) * sub_dim;
    }

    FloatVector decode(const PqCode& code) const;

    void save(const std::string& path) const;
    static PqCodebook load(const std::string& path);
};

struct PqTrainLog {
    // Mean quantization error after each Lloyd iteration, averaged over subspaces.
    std::vector<double> iteration_errors;
};

// Seeded k-means (k=256, k-means++ style init) per subspace. Deterministic.
PqCodebook train_pq(std::span<const FloatVector> sample, std::uint32_t m, std::uint32_t iters,
                    std::uint64_t seed, PqTrainLog* log = nullptr);

// Nearest centroid per subspace, ties to the lowest index.
PqCode pq_encode(const PqCodebook& cb, std::span<const float> v);

/// Per-query asymmetric lookup table: squared L2 from each query sub-vector
/// to every centroid.
struct DistanceTable {
    std::uint32_t m = 0;
    std::vector<float> values;  // m * 256

    float at(std::uint32_t subspace, std::uint8_t code) const {
        return values[static_cast<std::size_t>(subspace) * PqCodebook::kCentroids + code];
    }
};

DistanceTable build_distance_table(const PqCodebook& cb, std::span<const float> q);

inline float pq_distance(const DistanceTable& table, const std::uint8_t* code) {
    float sum = 0.0f;
    for (std::uint32_t s = 0; s < table.m; ++s) {
        sum += table.values[static_cast<std::size_t>(s) * PqCodebook::kCentroids + code[s]];
    }
    return sum;
}

inline float pq_distance(const DistanceTable& table, const PqCode& code) {
    return pq_distance(table, code.data());
}

// Codebook under which pq_distance is exactly squared L2 for every dataset
// vector (m=1, centroids are the distinct dataset vectors). Test-support mode;
// throws if the dataset has more than 256 distinct vectors.
PqCodebook identity_codebook(std::span<const FloatVector> dataset);

/// Precomputed centroid-to-centroid squared distances, one 256x256 table per
/// subspace. Gives a symmetric code-to-code distance without decoding.
class PqCrossTables {
public:
    PqCrossTables() = default;
    explicit PqCrossTables(const PqCodebook& cb);

    float code_distance(const std::uint8_t* a, const std::uint8_t* b) const {
        float sum = 0.0f;
        for (std::uint32_t s = 0; s < m_; ++s) {
            sum += tables_[(static_cast<std::size_t>(s) * 256 + a[s]) * 256 + b[s]];
        }
        return sum;
    }

private:
    std::uint32_t m_ = 0;
    std::vector<float> tables_;  // m * 256 * 256
};

/// In-memory PQ codes, one m-byte code per vertex. Fixed capacity so slots
/// have stable addresses; codes are written at a new id before that id
/// becomes reachable, and never rewritten.
class PqCodeStore {
public:
    PqCodeStore() = default;
    PqCodeStore(std::uint32_t m, std::uint64_t capacity) { reset(m, capacity); }

    void reset(std::uint32_t m, std::uint64_t capacity) {
        m_ = m;
        capacity_ = capacity;
        codes_.assign(static_cast<std::size_t>(m) * capacity, 0);
    }

    void set(VertexId v, const PqCode& code) {
        if (v >= capacity_) throw std::out_of_range("PqCodeStore: id beyond capacity");
        std::copy(code.begin(), code.end(), codes_.begin() + static_cast<std::size_t>(v) * m_);
    }

    const std::uint8_t* get(VertexId v) const { return codes_.data() + static_cast<std::size_t>(v) * m_; }

    std::uint32_t code_bytes() const { return m_; }
    std::uint64_t capacity() const { return capacity_; }

    void save(const std::string& path, std::uint64_t count) const;
    void load(const std::string& path, std::uint32_t m, std::uint64_t count, std::uint64_t capacity);

private:
    std::uint32_t m_ = 0;
    std::uint64_t capacity_ = 0;
    std::vector<std::uint8_t> codes_;
};

}  // namespace navis
