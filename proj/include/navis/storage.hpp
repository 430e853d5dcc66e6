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

#include <array>
#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "navis/core.hpp"
#include "navis/io_backend.hpp"
#include "navis/navis_cache.hpp"
#include "navis/stats.hpp"

namespace navis {

enum class LayoutMode : std::uint8_t { kDecoupled = 0, kPacked = 1 };

enum class PageProvenance : std::uint8_t { kRmw, kCache, kDisk };

struct StorageConfig {
    std::uint32_t dim = 0;
    std::uint32_t max_degree = 32;           // R
    std::uint16_t slots_per_page_override = 0;  // fixture knob; 0 = natural capacity
    bool verify_checksums = false;              // checked mode
    std::uint64_t capacity = 0;                 // max vertex count (fixed at open)
    std::size_t rmw_capacity = 128;             // clean RMW entries retained
};

// ---------------------------------------------------------------------------
// Edge page layout: {slot_count u16, slot_size u16, crc u32, reserved u32}
// header followed by fixed-size slots {vertex_id u32, degree u16, pad u16,
// R x u32 neighbors}. Empty slots carry the invalid-vertex sentinel.

class EdgePageLayout {
public:
    static constexpr std::size_t kHeaderSize = 12;

    EdgePageLayout() = default;
    EdgePageLayout(std::uint32_t max_degree, std::uint16_t slots_override);

    std::uint16_t slot_size() const { return slot_size_; }
    std::uint16_t slots_per_page() const { return slots_per_page_; }
    std::uint32_t max_degree() const { return max_degree_; }

    void format_page(std::uint8_t* page) const;
    void write_slot(std::uint8_t* page, std::uint16_t slot, VertexId id,
                    std::span<const VertexId> neighbors) const;

    struct SlotView {
        VertexId vertex_id = kInvalidVertex;
        std::uint16_t degree = 0;
        const std::uint8_t* neighbor_bytes = nullptr;  // degree * 4 bytes, unaligned
    };
    SlotView read_slot(const std::uint8_t* page, std::uint16_t slot) const;

    void seal_page(std::uint8_t* page) const;         // stores the payload CRC
    bool verify_page(const std::uint8_t* page) const;  // checks the stored CRC

private:
    std::uint32_t max_degree_ = 0;
    std::uint16_t slot_size_ = 0;
    std::uint16_t slots_per_page_ = 0;
};

// ---------------------------------------------------------------------------
// Authoritative vertex -> physical location map. Location words are single
// 64-bit atomics published with release semantics and read with acquire, so
// readers always see entirely-old or entirely-new locations.

struct EdgeLocation {
    std::uint64_t page = 0;
    std::uint16_t slot = 0;

    bool operator==(const EdgeLocation&) const = default;
};

class IndirectionTable {
public:
    static constexpr std::uint64_t kEmpty = ~0ull;

    explicit IndirectionTable(std::uint64_t capacity);

    // Location words use seq_cst so that, in the single total order with the
    // epoch-tracker slots, a reader missed by the reclamation scan is
    // guaranteed to observe the relocated location instead of the freed page.
    std::optional<EdgeLocation> edge_location(VertexId v) const {
        const std::uint64_t word = entries_[v].edge_word.load(std::memory_order_seq_cst);
        if (word == kEmpty) return std::nullopt;
        return EdgeLocation{word >> 16, static_cast<std::uint16_t>(word & 0xffff)};
    }

    bool live(VertexId v) const {
        return v < capacity_ && entries_[v].edge_word.load(std::memory_order_seq_cst) != kEmpty;
    }

    void publish_edge(VertexId v, EdgeLocation loc) {
        entries_[v].edge_word.store((loc.page << 16) | loc.slot, std::memory_order_seq_cst);
    }

    void publish_vector(VertexId v, std::uint64_t record) {
        entries_[v].vector_record.store(record, std::memory_order_release);
    }

    std::uint64_t vector_record(VertexId v) const {
        return entries_[v].vector_record.load(std::memory_order_acquire);
    }

    void clear(VertexId v) {
        entries_[v].edge_word.store(kEmpty, std::memory_order_release);
        entries_[v].vector_record.store(kEmpty, std::memory_order_release);
    }

    std::uint64_t capacity() const { return capacity_; }

    void save(std::ostream& out, std::uint64_t count) const;
    void load(std::istream& in, std::uint64_t count);

private:
    struct Entry {
        std::atomic<std::uint64_t> edge_word{kEmpty};
        std::atomic<std::uint64_t> vector_record{kEmpty};
    };
    std::uint64_t capacity_;
    std::unique_ptr<Entry[]> entries_;
};

// ---------------------------------------------------------------------------
// Epoch-based grace period for page reuse: a page freed in epoch e may be
// rewritten only once every reader active in e has finished.

class EpochTracker {
public:
    static constexpr int kSlots = 512;

    class Guard {
    public:
        Guard() = default;
        explicit Guard(EpochTracker* t);
        ~Guard() { release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;
        Guard(Guard&& o) noexcept : tracker_(o.tracker_) { o.tracker_ = nullptr; }
        Guard& operator=(Guard&& o) noexcept {
            if (this != &o) {
                release();
                tracker_ = o.tracker_;
                o.tracker_ = nullptr;
            }
            return *this;
        }
        void release();

    private:
        EpochTracker* tracker_ = nullptr;
    };

    Guard enter() { return Guard(this); }
    std::uint64_t current() const { return epoch_.load(std::memory_order_seq_cst); }
    void advance() { epoch_.fetch_add(1, std::memory_order_seq_cst); }

    // Smallest epoch any active reader entered at; UINT64_MAX when idle.
    std::uint64_t min_active() const;

private:
    friend class Guard;
    int claim_slot();

    std::atomic<std::uint64_t> epoch_{1};
    std::array<std::atomic<std::uint64_t>, kSlots> active_{};
    std::atomic<int> next_slot_{0};
};

// ---------------------------------------------------------------------------
// Per-edge-page live-slot counts plus the free list of fully invalidated
// pages awaiting their reclamation grace period.

class PageLedger {
public:
    void note_page(std::uint64_t page, std::uint32_t live_slots);
    // Returns true when the page just became fully invalidated.
    bool decrement(std::uint64_t page);
    void push_free(std::uint64_t page, std::uint64_t freed_epoch);
    std::optional<std::uint64_t> pop_reusable(std::uint64_t min_active_epoch);
    void reset();

    std::uint64_t total_live() const;
    std::uint32_t live_slots(std::uint64_t page) const;
    std::size_t free_count() const;
    std::uint64_t tracked_pages() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::uint32_t> live_;
    std::deque<std::pair<std::uint64_t, std::uint64_t>> free_;  // (page, epoch)
};

// ---------------------------------------------------------------------------
// Read-modify-write page cache: the only structure that ever holds a dirty
// page. Entries stay pinned (and ineligible for eviction) while a writer
// holds them; clean entries are retained for read hits up to rmw_capacity.

class RmwCache {
public:
    explicit RmwCache(std::size_t capacity) : capacity_(capacity) {}

    struct Entry {
        PageBuffer buffer;
        std::mutex write_mutex;
        std::atomic<bool> dirty{false};
        std::atomic<int> pins{0};
        bool loaded = false;
        std::uint64_t tick = 0;
    };
    using EntryPtr = std::shared_ptr<Entry>;

    /// Exclusive write handle; holds the entry's write lock. The entry is
    /// pinned by begin_write and unpinned when the handle goes away.
    class WriteHandle {
    public:
        WriteHandle(RmwCache* cache, EntryPtr e)
            : cache_(cache), entry_(std::move(e)), lock_(entry_->write_mutex) {}
        WriteHandle(WriteHandle&& o) noexcept
            : cache_(o.cache_), entry_(std::move(o.entry_)), lock_(std::move(o.lock_)) {}
        WriteHandle(const WriteHandle&) = delete;
        WriteHandle& operator=(const WriteHandle&) = delete;
        WriteHandle& operator=(WriteHandle&&) = delete;
        ~WriteHandle() {
            if (entry_) {
                entry_->pins.fetch_sub(1, std::memory_order_relaxed);
                lock_.unlock();
                cache_->trim();
            }
        }

        std::uint8_t* data() { return entry_->buffer.data(); }
        bool loaded() const { return entry_->loaded; }
        void mark_loaded() { entry_->loaded = true; }
        void mark_dirty() { entry_->dirty.store(true, std::memory_order_release); }
        void mark_clean() { entry_->dirty.store(false, std::memory_order_release); }

    private:
        RmwCache* cache_;
        EntryPtr entry_;
        std::unique_lock<std::mutex> lock_;
    };

    WriteHandle begin_write(PageId page);

    // Read probe; only clean entries hit (dirty pages are unpublished).
    EntryPtr find_clean(PageId page);

    void drop(PageId page);
    void clear_role(FileRole role);
    std::size_t size() const;

private:
    friend class WriteHandle;
    static std::uint64_t key_of(PageId p) {
        return (static_cast<std::uint64_t>(p.role) << 62) | p.page_no;
    }
    void trim();

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, EntryPtr> entries_;
    std::uint64_t tick_ = 0;
};

// ---------------------------------------------------------------------------
// Batched adjacency read results: one flat R-stride block per requested id.

struct EdgeLists {
    std::uint32_t stride = 0;
    std::vector<std::uint16_t> degrees;
    std::vector<VertexId> neighbors;          // stride per id
    std::vector<PageProvenance> provenance;
    std::vector<const float*> vectors;        // packed layout only (piggyback)
    std::vector<float> vector_storage;

    void reset(std::size_t n, std::uint32_t max_degree) {
        stride = max_degree;
        degrees.assign(n, 0);
        neighbors.assign(static_cast<std::size_t>(n) * max_degree, kInvalidVertex);
        provenance.assign(n, PageProvenance::kDisk);
        vectors.assign(n, nullptr);
        vector_storage.clear();
    }

    std::span<const VertexId> list(std::size_t i) const {
        return {neighbors.data() + i * stride, degrees[i]};
    }
};

struct VerifyReport {
    bool ok = true;
    std::vector<std::string> failures;

    void fail(std::string msg) {
        ok = false;
        failures.push_back(std::move(msg));
    }
};

// ---------------------------------------------------------------------------
// Storage interface shared by the decoupled and packed layouts.

class GraphStore {
public:
    virtual ~GraphStore() = default;

    virtual LayoutMode layout() const = 0;
    virtual std::uint32_t dim() const = 0;
    virtual std::uint32_t max_degree() const = 0;
    virtual std::uint64_t vertex_count() const = 0;
    virtual bool live(VertexId v) const = 0;

    virtual VertexId allocate_vertex() = 0;

    virtual void read_adjacency(std::span<const VertexId> ids, EdgeLists& out,
                                TraversalStats* stats) = 0;
    virtual std::vector<FloatVector> read_vectors(std::span<const VertexId> ids,
                                                  TraversalStats* stats) = 0;
    virtual CommitStats commit_insert(
        VertexId new_v, const FloatVector& vec, std::span<const VertexId> new_edges,
        const std::vector<std::pair<VertexId, std::vector<VertexId>>>& neighbor_updates) = 0;

    /// Locks the page shards covering the given vertices' current pages, in
    /// global order (ascending shard id); stable against concurrent
    /// relocation via verify-and-retry.
    class PageLockGuard {
    public:
        PageLockGuard() = default;
        explicit PageLockGuard(std::shared_ptr<void> session) : session_(std::move(session)) {}
        void release() { session_.reset(); }

    private:
        std::shared_ptr<void> session_;
    };

    virtual PageLockGuard lock_vertices(std::span<const VertexId> ids) = 0;
};

// ---------------------------------------------------------------------------
// Locality-driven decoupled layout: slotted edgelist pages, a separate
// vector file, out-of-place edge updates gathered into fresh pages, and
// free-page reuse behind an epoch grace period.

class DecoupledStorage : public GraphStore {
public:
    DecoupledStorage(std::shared_ptr<IoBackend> backend, const StorageConfig& config,
                     NavisCache* cache);

    LayoutMode layout() const override { return LayoutMode::kDecoupled; }
    std::uint32_t dim() const override { return config_.dim; }
    std::uint32_t max_degree() const override { return config_.max_degree; }
    std::uint64_t vertex_count() const override {
        return next_id_.load(std::memory_order_acquire);
    }
    bool live(VertexId v) const override {
        return v < table_->capacity() && table_->live(v);
    }

    VertexId allocate_vertex() override;

    void read_adjacency(std::span<const VertexId> ids, EdgeLists& out,
                        TraversalStats* stats) override;
    std::vector<FloatVector> read_vectors(std::span<const VertexId> ids,
                                          TraversalStats* stats) override;

    /// Split-phase vector read: begin submits one batch for the group (pages
    /// deduplicated), finish harvests it. Lets the reranker overlap the next
    /// group's submission with the previous group's distance computation.
    struct PendingVectorRead {
        std::vector<VertexId> ids;
        std::vector<std::uint64_t> records;
        std::vector<std::uint64_t> pages;
        std::vector<std::unique_ptr<PageBuffer>> buffers;
        BatchTicket ticket;
        EpochTracker::Guard guard;
        bool active = false;
    };
    PendingVectorRead begin_read_vectors(std::span<const VertexId> ids);
    std::vector<FloatVector> finish_read_vectors(PendingVectorRead& pending,
                                                 TraversalStats* stats);
    CommitStats commit_insert(
        VertexId new_v, const FloatVector& vec, std::span<const VertexId> new_edges,
        const std::vector<std::pair<VertexId, std::vector<VertexId>>>& neighbor_updates) override;

    PageLockGuard lock_vertices(std::span<const VertexId> ids) override;

    // Convenience single-vertex read (unit tests, audits).
    std::uint16_t read_edgelist(VertexId v, std::vector<VertexId>& out,
                                PageProvenance* provenance = nullptr,
                                TraversalStats* stats = nullptr);

    /// BFS-greedy page placement from the medoid; rewrites the edge file.
    /// Build-time only (single-threaded).
    void initial_placement(const std::vector<std::vector<VertexId>>& adjacency, VertexId medoid);

    VerifyReport verify();

    void flush();

    const EdgePageLayout& edge_layout() const { return layout_; }
    const IndirectionTable& indirection() const { return *table_; }
    RmwCache& rmw() { return rmw_; }
    PageLedger& ledger() { return ledger_; }
    EpochTracker& epochs() { return epochs_; }
    IoBackend& backend() { return *backend_; }
    NavisCache* cache() { return cache_; }
    const StorageConfig& config() const { return config_; }

    std::uint32_t vector_stride() const { return vector_stride_; }
    std::uint32_t vectors_per_page() const { return vectors_per_page_; }
    std::uint32_t pages_per_record() const { return pages_per_record_; }

    // Serialization of the table + layout parameters ("meta" payload parts).
    void save_state(std::ostream& out) const;
    void load_state(std::istream& in, std::uint64_t vertex_count);

private:
    friend class PackedStorage;

    void write_vector_record(VertexId v, const FloatVector& vec, CommitStats& stats);
    std::vector<std::uint64_t> acquire_destination_pages(std::size_t count);
    static std::size_t shard_of(std::uint64_t page) { return page % kLockShards; }

    static constexpr std::size_t kLockShards = 1024;

    std::shared_ptr<IoBackend> backend_;
    StorageConfig config_;
    NavisCache* cache_;
    EdgePageLayout layout_;
    std::uint32_t vector_stride_ = 0;
    std::uint32_t vectors_per_page_ = 0;   // when stride <= page
    std::uint32_t pages_per_record_ = 1;   // when stride > page

    std::unique_ptr<IndirectionTable> table_;
    PageLedger ledger_;
    EpochTracker epochs_;
    RmwCache rmw_;
    std::atomic<VertexId> next_id_{0};

    std::array<std::mutex, kLockShards> lock_shards_;
    std::mutex commit_mutex_aux_;  // protects destination-page acquisition
};

}  // namespace navis
