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

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "navis/core.hpp"
#include "navis/stats.hpp"

namespace navis {

enum class RerankPath : std::uint8_t { kSearch, kPos };

struct CasrConfig {
    std::uint32_t s_search = 8;  // group size on the search path
    std::uint32_t s_pos = 8;     // group size on the position-seeking path
    bool calibrated = false;
    std::uint32_t top_k = 10;

    std::uint32_t group_for(RerankPath path) const {
        return path == RerankPath::kSearch ? s_search : s_pos;
    }
};

struct RerankResult {
    // Exact distances in consumption order: a prefix of E_sorted.
    std::vector<std::pair<VertexId, float>> exact;
    // Converged top-K, ordered by (exact distance, id).
    std::vector<VertexId> top;
    std::uint32_t vectors_loaded = 0;    // including any speculative overshoot
    std::uint32_t groups_consumed = 0;

    // Loaded full vectors, retained on request (insert path reuses them).
    std::unordered_map<VertexId, FloatVector> kept_vectors;

    bool has_exact(VertexId v) const {
        for (const auto& [id, _] : exact) {
            if (id == v) return true;
        }
        return false;
    }
    float exact_distance(VertexId v) const {
        for (const auto& [id, d] : exact) {
            if (id == v) return d;
        }
        throw std::out_of_range("RerankResult: no exact distance for vertex");
    }
};

// Nearest-rank percentile: the ceil(q * n)-th order statistic (1-indexed).
std::uint32_t nearest_rank_percentile(std::vector<std::uint32_t> counts, double q);

// Group-size calibration: P25 of the per-query convergence counts, clamped
// to [1, pool_size].
std::uint32_t calibrate_group_size_from_counts(const std::vector<std::uint32_t>& counts,
                                               std::uint32_t pool_size);

// Full calibration over a query set; `convergence_count` runs the pipeline
// with s=1 and reports how many vectors the convergence break consumed.
std::uint32_t calibrate_group_size(
    std::size_t query_count, std::uint32_t pool_size,
    const std::function<std::uint32_t(std::size_t)>& convergence_count);

}  // namespace navis
