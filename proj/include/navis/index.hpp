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
#include <string>

#include "navis/core.hpp"
#include "navis/entrance_graph.hpp"
#include "navis/io_backend.hpp"
#include "navis/navis_cache.hpp"
#include "navis/packed_storage.hpp"
#include "navis/pq.hpp"
#include "navis/search_engine.hpp"
#include "navis/stats.hpp"
#include "navis/storage.hpp"

namespace navis {

struct IndexOptions {
    GraphParams graph;                  // dim, R, beamwidth
    std::uint32_t search_pool_size = 40;   // |E_search|
    std::uint32_t pos_pool_size = 100;     // |E_pos|
    std::uint32_t top_k = 10;
    EntranceParams entrance;
    LayoutMode layout = LayoutMode::kDecoupled;

    std::uint32_t pq_m = 8;
    std::uint32_t pq_train_iters = 25;
    bool identity_pq = false;           // lossless oracle mode (tests)

    std::uint64_t seed = 42;
    std::uint64_t capacity = 0;         // 0: 4x the build size
    std::size_t cache_pages = 4096;
    bool verify_checksums = false;
    std::uint16_t slots_per_page_override = 0;

    bool full_rerank = false;           // disable convergence early-stop
    bool no_self_prune = false;         // skip pruning the new vertex's own list
    bool dynamic_entrance = true;       // keep the entrance graph maintained
};

struct SearchResult {
    std::vector<std::pair<VertexId, float>> top;  // ids with exact distances
    TraversalStats stats;
    std::uint32_t groups_consumed = 0;
};

struct InsertStats {
    VertexId id = kInvalidVertex;
    std::uint64_t position_seek_us = 0;
    std::uint64_t structural_us = 0;
    std::uint64_t ent_update_us = 0;
    TraversalStats read_stats;   // position seeking + rerank + structural reads
    CommitStats commit;
    bool entrance_inserted = false;
};

/// An open index: storage, PQ codes, entrance graph and caches, plus the
/// search and insert pipelines that run over them.
class Index {
public:
    static std::unique_ptr<Index> build(const std::vector<FloatVector>& vectors,
                                        const IndexOptions& options,
                                        std::shared_ptr<IoBackend> backend,
                                        const std::function<void(std::uint64_t)>& progress = {});

    // File-backed convenience: creates/opens the backend inside `dir`.
    static std::unique_ptr<Index> build_into(const std::string& dir,
                                             const std::vector<FloatVector>& vectors,
                                             IndexOptions options);
    static std::unique_ptr<Index> open(const std::string& dir, IndexOptions overrides = {});
    void save(const std::string& dir);

    // --- query path -------------------------------------------------------
    SearchResult search(const FloatVector& query, const SearchParams& params);

    std::pair<CandidatePool, TraversalStats> beam_traverse(
        const DistanceTable& table, std::span<const VertexId> entries, std::uint32_t pool_size,
        std::uint32_t beam_width,
        std::unordered_map<VertexId, FloatVector>* piggyback = nullptr);

    RerankResult casr_rerank(const FloatVector& query, const CandidatePool& pool,
                             std::uint32_t group_size, std::uint32_t top_k, TraversalStats* stats,
                             bool keep_vectors = false,
                             const std::unordered_map<VertexId, FloatVector>* piggyback = nullptr);

    // Convergence count for one query with s=1 (calibration probe).
    std::uint32_t convergence_count(const FloatVector& query, RerankPath path);
    void calibrate(std::span<const FloatVector> queries);

    // --- update path ------------------------------------------------------
    InsertStats insert(const FloatVector& vector);

    // --- plumbing ---------------------------------------------------------
    std::vector<VertexId> entry_points(const DistanceTable& table, EntrySelection* selection);
    std::vector<std::vector<VertexId>> dump_adjacency();

    GraphStore& store() { return *store_; }
    DecoupledStorage* decoupled() { return dynamic_cast<DecoupledStorage*>(store_.get()); }
    NavisCache* cache() { return cache_.get(); }
    EntranceGraph& entrance() { return *entrance_; }
    const PqCodebook& codebook() const { return codebook_; }
    const PqCodeStore& codes() const { return codes_; }
    const PqCrossTables& cross_tables() const { return cross_; }
    IoBackend& backend() { return *backend_; }
    CasrConfig& casr() { return casr_; }
    const IndexOptions& options() const { return opts_; }
    VertexId medoid() const { return medoid_.load(std::memory_order_acquire); }

    DistanceTable query_table(const FloatVector& query) const {
        return build_distance_table(codebook_, query);
    }

private:
    Index() = default;
    void init_components(std::shared_ptr<IoBackend> backend, std::uint64_t capacity);
    std::vector<std::pair<VertexId, std::vector<VertexId>>> wire_neighbors(
        VertexId new_v, const FloatVector& vec, std::span<const VertexId> selected,
        const EdgeLists& current, const RerankResult& rerank, TraversalStats* stats);

    IndexOptions opts_;
    std::shared_ptr<IoBackend> backend_;
    std::unique_ptr<NavisCache> cache_;
    std::unique_ptr<GraphStore> store_;
    PqCodebook codebook_;
    PqCrossTables cross_;
    PqCodeStore codes_;
    std::unique_ptr<EntranceGraph> entrance_;
    std::atomic<VertexId> medoid_{kInvalidVertex};
    CasrConfig casr_;
};

}  // namespace navis
