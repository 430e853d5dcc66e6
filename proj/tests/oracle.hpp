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

// Test-only reference implementations, independent of the storage and engine
// paths they are checked against.

#include <algorithm>
#include <unordered_set>
#include <vector>

#include "navis/core.hpp"

namespace navis::testing {

/// In-memory beam search over an adjacency list with the same pool rules,
/// beam batching and tie-breaks as the engine: seeds, then rounds of up to W
/// closest unvisited expansions until the pool is fully visited.
template <typename DistFn>
CandidatePool reference_beam_search(const std::vector<std::vector<VertexId>>& adjacency,
                                    std::span<const VertexId> entries, std::size_t pool_size,
                                    std::size_t beam_width, DistFn&& dist) {
    CandidatePool pool(pool_size);
    std::unordered_set<VertexId> seen;
    for (VertexId e : entries) {
        if (seen.insert(e).second) pool.insert({e, dist(e), false});
    }
    while (true) {
        std::vector<std::size_t> round;
        for (std::size_t i = 0; i < pool.entries().size() && round.size() < beam_width; ++i) {
            if (!pool.entries()[i].visited) round.push_back(i);
        }
        if (round.empty()) break;
        std::vector<VertexId> ids;
        for (std::size_t i : round) ids.push_back(pool.entries()[i].vertex);
        for (std::size_t i : round) pool.mark_visited(i);
        for (VertexId v : ids) {
            for (VertexId u : adjacency[v]) {
                if (!seen.insert(u).second) continue;
                pool.insert({u, dist(u), false});
            }
        }
    }
    return pool;
}

/// Brute-force top-k over explicit (id, distance) pairs with the engine's
/// (distance, id) tie-break.
inline std::vector<VertexId> brute_force_top_k(std::vector<std::pair<VertexId, float>> scored,
                                               std::size_t k) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::vector<VertexId> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].first);
    return out;
}

}  // namespace navis::testing
