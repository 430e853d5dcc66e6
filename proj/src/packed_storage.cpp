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

#include "navis/packed_storage.hpp"

#include <algorithm>
#include <cstring>

namespace navis {

// Record: [dim x f32][degree u16][pad u16][R x u32]. One record per page once
// vector + edgelist exceed half a page, otherwise as many as fit.
PackedStorage::PackedStorage(std::shared_ptr<IoBackend> backend, const StorageConfig& config)
    : backend_(std::move(backend)), config_(config), rmw_(config.rmw_capacity) {
    if (config_.dim == 0) throw std::invalid_argument("PackedStorage: dim must be >= 1");
    if (config_.capacity == 0) throw std::invalid_argument("PackedStorage: capacity must be set");
    record_size_ = config_.dim * 4 + 4 + 4 * config_.max_degree;
    if (record_size_ > kPageSize) {
        throw std::invalid_argument("PackedStorage: record does not fit a 4 KiB page");
    }
    records_per_page_ =
        record_size_ > kPageSize / 2 ? 1 : static_cast<std::uint32_t>(kPageSize / record_size_);
    table_ = std::make_unique<IndirectionTable>(config_.capacity);
}

VertexId PackedStorage::allocate_vertex() {
    const VertexId id = next_id_.fetch_add(1, std::memory_order_acq_rel);
    if (id >= config_.capacity) {
        next_id_.fetch_sub(1, std::memory_order_acq_rel);
        throw std::runtime_error("PackedStorage: vertex capacity exhausted");
    }
    return id;
}

void PackedStorage::read_adjacency(std::span<const VertexId> ids, EdgeLists& out,
                                   TraversalStats* stats) {
    out.reset(ids.size(), config_.max_degree);
    if (ids.empty()) return;
    out.vector_storage.resize(static_cast<std::size_t>(ids.size()) * config_.dim);

    struct Group {
        std::uint64_t page;
        std::vector<std::uint32_t> indices;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!table_->live(ids[i])) {
            throw std::out_of_range("read_adjacency: vertex not found: " + std::to_string(ids[i]));
        }
        const std::uint64_t page = page_of(ids[i]);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.page == page; });
        if (it == groups.end()) {
            groups.push_back({page, {}});
            it = std::prev(groups.end());
        }
        it->indices.push_back(static_cast<std::uint32_t>(i));
    }

    const auto copy_record = [&](const std::uint8_t* page_bytes, std::uint32_t i) {
        const std::uint8_t* rec = record_at(page_bytes, slot_of(ids[i]));
        float* vec_dst = out.vector_storage.data() + static_cast<std::size_t>(i) * config_.dim;
        std::memcpy(vec_dst, rec, config_.dim * 4ull);
        out.vectors[i] = vec_dst;
        std::uint16_t degree;
        std::memcpy(&degree, rec + config_.dim * 4ull, 2);
        degree = std::min<std::uint16_t>(degree, config_.max_degree);
        out.degrees[i] = degree;
        std::memcpy(out.neighbors.data() + static_cast<std::size_t>(i) * out.stride,
                    rec + config_.dim * 4ull + 4, static_cast<std::size_t>(degree) * 4);
    };

    std::vector<std::unique_ptr<PageBuffer>> bufs;
    IoBatch batch;
    std::vector<std::size_t> miss_groups;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (RmwCache::EntryPtr e = rmw_.find_clean({FileRole::kEdge, groups[g].page})) {
            for (std::uint32_t i : groups[g].indices) {
                copy_record(e->buffer.data(), i);
                out.provenance[i] = PageProvenance::kRmw;
            }
            if (stats) stats->rmw_hits++;
            continue;
        }
        bufs.push_back(std::make_unique<PageBuffer>());
        batch.add_read({FileRole::kEdge, groups[g].page}, bufs.back()->data());
        miss_groups.push_back(g);
    }
    if (!batch.empty()) {
        BatchTicket ticket = backend_->submit(std::move(batch));
        if (!backend_->wait_batch(ticket).all_ok()) {
            throw std::runtime_error("read_adjacency: I/O error");
        }
        for (std::size_t k = 0; k < miss_groups.size(); ++k) {
            const Group& g = groups[miss_groups[k]];
            for (std::uint32_t i : g.indices) {
                copy_record(bufs[k]->data(), i);
                out.provenance[i] = PageProvenance::kDisk;
            }
            if (stats) {
                stats->disk_reads++;
                stats->edge_pages_read++;
                // Every fetched record's vector payload rides along; the
                // consumer classifies it once the final set is known.
                const std::uint64_t vec_bytes =
                    static_cast<std::uint64_t>(records_per_page_) * config_.dim * 4;
                const std::uint64_t edge_bytes =
                    static_cast<std::uint64_t>(records_per_page_) * (4 + 4ull * config_.max_degree);
                stats->unclassified_vector_bytes += vec_bytes;
                stats->edgelist_bytes += edge_bytes;
                stats->padding_bytes += kPageSize - vec_bytes - edge_bytes;
            }
        }
    }
}

std::vector<FloatVector> PackedStorage::read_vectors(std::span<const VertexId> ids,
                                                     TraversalStats* stats) {
    // Vectors piggyback on the packed record; a direct vector fetch reads the
    // whole record page.
    EdgeLists lists;
    read_adjacency(ids, lists, stats);
    std::vector<FloatVector> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out[i].assign(lists.vectors[i], lists.vectors[i] + config_.dim);
    }
    return out;
}

CommitStats PackedStorage::commit_insert(
    VertexId new_v, const FloatVector& vec, std::span<const VertexId> new_edges,
    const std::vector<std::pair<VertexId, std::vector<VertexId>>>& neighbor_updates) {
    CommitStats stats;
    if (vec.size() != config_.dim) throw std::invalid_argument("commit_insert: dimension mismatch");
    if (new_edges.size() > config_.max_degree) {
        throw std::invalid_argument("commit_insert: new vertex degree above cap");
    }

    {
        std::lock_guard lock(grow_mutex_);
        const std::uint64_t needed = page_of(new_v) + 1;
        const std::uint64_t have = backend_->page_count(FileRole::kEdge);
        if (needed > have) backend_->allocate_pages(FileRole::kEdge, needed - have);
    }

    // Group all touched records by page; each touched page is rewritten whole.
    struct PendingRecord {
        VertexId v;
        const FloatVector* vec;  // null = keep the on-page vector bytes
        std::span<const VertexId> edges;
    };
    std::vector<std::pair<std::uint64_t, std::vector<PendingRecord>>> pages;
    const auto add_record = [&](PendingRecord rec) {
        const std::uint64_t page = page_of(rec.v);
        for (auto& [p, recs] : pages) {
            if (p == page) {
                recs.push_back(rec);
                return;
            }
        }
        pages.push_back({page, {rec}});
    };
    add_record({new_v, &vec, new_edges});
    for (const auto& [v, list] : neighbor_updates) {
        if (list.size() > config_.max_degree) {
            throw std::invalid_argument("commit_insert: neighbor degree above cap");
        }
        add_record({v, nullptr, std::span<const VertexId>(list)});
    }

    for (auto& [page, recs] : pages) {
        auto handle = rmw_.begin_write({FileRole::kEdge, page});
        if (!handle.loaded()) {
            IoBatch batch;
            batch.add_read({FileRole::kEdge, page}, handle.data());
            BatchTicket t = backend_->submit(std::move(batch));
            if (!backend_->wait_batch(t).all_ok()) {
                throw std::runtime_error("commit_insert: page read failed");
            }
            handle.mark_loaded();
        }
        handle.mark_dirty();
        for (const PendingRecord& rec : recs) {
            std::uint8_t* dst = handle.data() + static_cast<std::size_t>(slot_of(rec.v)) * record_size_;
            if (rec.vec) std::memcpy(dst, rec.vec->data(), config_.dim * 4ull);
            const std::uint16_t degree = static_cast<std::uint16_t>(rec.edges.size());
            std::memcpy(dst + config_.dim * 4ull, &degree, 2);
            std::memset(dst + config_.dim * 4ull + 2, 0, 2);
            std::memcpy(dst + config_.dim * 4ull + 4, rec.edges.data(), rec.edges.size() * 4);
        }
        IoBatch batch;
        batch.add_write({FileRole::kEdge, page}, handle.data());
        BatchTicket t = backend_->submit(std::move(batch));
        if (!backend_->wait_batch(t).all_ok()) {
            throw std::runtime_error("commit_insert: page write failed");
        }
        handle.mark_clean();

        stats.edge_pages_written++;
        bool wrote_new_vector = false;
        for (const PendingRecord& rec : recs) wrote_new_vector |= rec.vec != nullptr;
        const std::uint64_t vec_bytes = config_.dim * 4ull;
        const std::uint64_t all_vec_bytes =
            static_cast<std::uint64_t>(records_per_page_) * vec_bytes;
        const std::uint64_t all_edge_bytes =
            static_cast<std::uint64_t>(records_per_page_) * (4 + 4ull * config_.max_degree);
        stats.vector_bytes_written += wrote_new_vector ? vec_bytes : 0;
        stats.rewritten_vector_bytes += all_vec_bytes - (wrote_new_vector ? vec_bytes : 0);
        stats.edgelist_bytes_written += all_edge_bytes;
        stats.padding_bytes_written += kPageSize - all_vec_bytes - all_edge_bytes;
    }

    // Updated neighbors keep their fixed locations; only the new vertex needs
    // publishing, and it publishes last.
    table_->publish_vector(new_v, new_v);
    table_->publish_edge(new_v, {page_of(new_v), static_cast<std::uint16_t>(slot_of(new_v))});
    return stats;
}

GraphStore::PageLockGuard PackedStorage::lock_vertices(std::span<const VertexId>) {
    // Baseline mode is exercised single-threaded (build equivalence and byte
    // accounting); the in-place page rewrites here are not torn-read safe.
    return {};
}

void PackedStorage::flush() { backend_->flush(FileRole::kEdge); }

void PackedStorage::save_state(std::ostream& out) const {
    table_->save(out, next_id_.load(std::memory_order_acquire));
}

void PackedStorage::load_state(std::istream& in, std::uint64_t vertex_count) {
    table_->load(in, vertex_count);
    next_id_.store(static_cast<VertexId>(vertex_count), std::memory_order_release);
}

}  // namespace navis
