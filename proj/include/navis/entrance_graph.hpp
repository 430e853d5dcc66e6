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
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "navis/core.hpp"
#include "navis/pq.hpp"

namespace navis {

struct EntranceParams {
    double sample_ratio = 0.01;   // target |G_ent| / |G|
    std::uint32_t max_degree = 32;  // degree cap inside the entrance graph
    std::uint32_t pool_size = 40;   // explored-set size for entrance search
    std::uint32_t entry_count = 10;  // entry points handed to the on-disk stage

    void validate() const {
        if (sample_ratio <= 0.0 || sample_ratio >= 1.0) {
            throw std::invalid_argument("EntranceParams: sample_ratio must be in (0, 1)");
        }
        if (max_degree < 1) throw std::invalid_argument("EntranceParams: max_degree must be >= 1");
    }
};

struct ScoredCandidate {
    VertexId id = kInvalidVertex;
    float dist = 0.0f;
};

/// Vamana-style diversity prune: scan candidates ascending by distance and
/// keep one unless an already-kept neighbor dominates it under the alpha
/// rule; stops at cap. Deterministic (ties break on lower id).
std::vector<VertexId> alpha_prune(std::vector<ScoredCandidate> candidates,
                                  const std::function<float(VertexId, VertexId)>& pair_dist,
                                  std::size_t cap, float alpha = 1.2f);

struct EntrySelection {
    std::vector<VertexId> entries;  // n_entry closest members
    CandidatePool pool;             // the full explored set, reused by updates
};

/// Small in-memory proximity graph supplying entry points for every
/// traversal. Readers traverse via immutable adjacency snapshots; structural
/// changes serialize on one exclusive guard and install only precomputed
/// lists (no distance work inside the critical section).
class EntranceGraph {
public:
    EntranceGraph(const EntranceParams& params, const PqCodeStore* codes,
                  const PqCrossTables* cross);

    // Samples round(sample_ratio * n) vertices with the seeded RNG and wires
    // them by incremental insertion among themselves. Build-time only.
    void build_initial(std::uint64_t graph_size, double sample_ratio, std::uint64_t seed);

    EntrySelection select_entry_points(const DistanceTable& table) const;

    enum class UpdateOutcome { kInserted, kSkipped };
    // Reuses the insertion's explored sets; see UpdateOutcome. The caller
    // guarantees q's on-disk insertion has committed.
    UpdateOutcome navis_update(VertexId q, const CandidatePool& e_pos, const CandidatePool& e_ent,
                               std::uint64_t graph_size);

    std::size_t member_count() const { return member_count_.load(std::memory_order_acquire); }
    bool contains(VertexId v) const;
    std::shared_ptr<const std::vector<VertexId>> adjacency_of(VertexId v) const;
    std::vector<VertexId> members_snapshot() const;
    VertexId entry_seed() const { return entry_seed_; }

    void save(const std::string& path) const;
    void load(const std::string& path);

    const EntranceParams& params() const { return params_; }

    // True while the structural guard is held on this thread; entrance
    // distance helpers refuse to run in that state.
    static bool in_critical_section();

private:
    float code_dist(VertexId a, VertexId b) const;
    float table_dist(const DistanceTable& table, VertexId v) const;
    CandidatePool search_members(const std::function<float(VertexId)>& dist_to_q,
                                 std::size_t pool_size) const;
    void insert_member_locked_free(VertexId q, const CandidatePool& pool);

    EntranceParams params_;
    const PqCodeStore* codes_;
    const PqCrossTables* cross_;

    mutable std::shared_mutex mutex_;
    std::unordered_map<VertexId, std::shared_ptr<const std::vector<VertexId>>> adjacency_;
    std::atomic<std::size_t> member_count_{0};
    VertexId entry_seed_ = kInvalidVertex;
};

}  // namespace navis
