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

#include "navis/storage.hpp"

namespace navis {

/// Packed baseline layout: each vertex stores a [vector][degree][edgelist]
/// record at a fixed, id-derived location; an insertion rewrites every
/// touched record's page whole. Used for A/B byte accounting against the
/// decoupled layout; not hardened for concurrent updates.
class PackedStorage : public GraphStore {
public:
    PackedStorage(std::shared_ptr<IoBackend> backend, const StorageConfig& config);

    LayoutMode layout() const override { return LayoutMode::kPacked; }
    std::uint32_t dim() const override { return config_.dim; }
    std::uint32_t max_degree() const override { return config_.max_degree; }
    std::uint64_t vertex_count() const override {
        return next_id_.load(std::memory_order_acquire);
    }
    bool live(VertexId v) const override { return table_->live(v); }

    VertexId allocate_vertex() override;

    void read_adjacency(std::span<const VertexId> ids, EdgeLists& out,
                        TraversalStats* stats) override;
    std::vector<FloatVector> read_vectors(std::span<const VertexId> ids,
                                          TraversalStats* stats) override;
    CommitStats commit_insert(
        VertexId new_v, const FloatVector& vec, std::span<const VertexId> new_edges,
        const std::vector<std::pair<VertexId, std::vector<VertexId>>>& neighbor_updates) override;

    PageLockGuard lock_vertices(std::span<const VertexId> ids) override;

    std::uint32_t record_size() const { return record_size_; }
    std::uint32_t records_per_page() const { return records_per_page_; }

    void flush();
    void save_state(std::ostream& out) const;
    void load_state(std::istream& in, std::uint64_t vertex_count);

private:
    std::uint64_t page_of(VertexId v) const { return v / records_per_page_; }
    std::uint32_t slot_of(VertexId v) const { return v % records_per_page_; }
    const std::uint8_t* record_at(const std::uint8_t* page, std::uint32_t slot) const {
        return page + static_cast<std::size_t>(slot) * record_size_;
    }

    std::shared_ptr<IoBackend> backend_;
    StorageConfig config_;
    std::uint32_t record_size_ = 0;
    std::uint32_t records_per_page_ = 0;
    std::unique_ptr<IndirectionTable> table_;  // liveness + atomic publication
    RmwCache rmw_;
    std::atomic<VertexId> next_id_{0};
    std::mutex grow_mutex_;
};

}  // namespace navis
