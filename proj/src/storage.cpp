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

#include "navis/storage.hpp"

#include <zlib.h>

#include <algorithm>
#include <cassert>
#include <cstring>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace navis {

namespace {

// Thread-local pool of aligned page buffers for transient batch reads.
std::vector<std::unique_ptr<PageBuffer>>& buffer_pool() {
    thread_local std::vector<std::unique_ptr<PageBuffer>> pool;
    return pool;
}

std::unique_ptr<PageBuffer> pool_get() {
    auto& pool = buffer_pool();
    if (!pool.empty()) {
        auto buf = std::move(pool.back());
        pool.pop_back();
        return buf;
    }
    return std::make_unique<PageBuffer>();
}

void pool_put(std::unique_ptr<PageBuffer> buf) {
    auto& pool = buffer_pool();
    if (pool.size() < 64) pool.push_back(std::move(buf));
}

template <typename T>
void store_le(std::uint8_t* dst, T v) {
    std::memcpy(dst, &v, sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* src) {
    T v;
    std::memcpy(&v, src, sizeof(T));
    return v;
}

// Tracks which pages the current thread holds page locks for, so commit can
// enforce its lock-held precondition in checked mode.
struct LockSession {
    const void* owner = nullptr;
    std::vector<std::mutex*> locks;
    std::unordered_set<std::uint64_t> pages;

    ~LockSession();
};

thread_local LockSession* tl_lock_session = nullptr;

LockSession::~LockSession() {
    tl_lock_session = nullptr;
    for (auto it = locks.rbegin(); it != locks.rend(); ++it) (*it)->unlock();
}

}  // namespace

// ---------------------------------------------------------------------------
// EdgePageLayout

EdgePageLayout::EdgePageLayout(std::uint32_t max_degree, std::uint16_t slots_override)
    : max_degree_(max_degree) {
    // vertex_id u32 + degree u16 + 2 bytes padding + R neighbor ids.
    slot_size_ = static_cast<std::uint16_t>(8 + 4 * max_degree);
    const std::uint16_t natural = static_cast<std::uint16_t>((kPageSize - kHeaderSize) / slot_size_);
    if (natural == 0) throw std::invalid_argument("EdgePageLayout: slot does not fit a page");
    if (slots_override > natural) {
        throw std::invalid_argument("EdgePageLayout: slots_per_page_override above page capacity");
    }
    slots_per_page_ = slots_override ? slots_override : natural;
}

void EdgePageLayout::format_page(std::uint8_t* page) const {
    std::memset(page, 0, kPageSize);
    store_le<std::uint16_t>(page, slots_per_page_);
    store_le<std::uint16_t>(page + 2, slot_size_);
    for (std::uint16_t s = 0; s < slots_per_page_; ++s) {
        store_le<VertexId>(page + kHeaderSize + static_cast<std::size_t>(s) * slot_size_, kInvalidVertex);
    }
}

void EdgePageLayout::write_slot(std::uint8_t* page, std::uint16_t slot, VertexId id,
                                std::span<const VertexId> neighbors) const {
    if (slot >= slots_per_page_ || neighbors.size() > max_degree_) {
        throw std::invalid_argument("EdgePageLayout: slot write out of bounds");
    }
    std::uint8_t* base = page + kHeaderSize + static_cast<std::size_t>(slot) * slot_size_;
    store_le<VertexId>(base, id);
    store_le<std::uint16_t>(base + 4, static_cast<std::uint16_t>(neighbors.size()));
    store_le<std::uint16_t>(base + 6, 0);
    std::memcpy(base + 8, neighbors.data(), neighbors.size() * sizeof(VertexId));
}

EdgePageLayout::SlotView EdgePageLayout::read_slot(const std::uint8_t* page, std::uint16_t slot) const {
    const std::uint8_t* base = page + kHeaderSize + static_cast<std::size_t>(slot) * slot_size_;
    SlotView view;
    view.vertex_id = load_le<VertexId>(base);
    view.degree = load_le<std::uint16_t>(base + 4);
    view.neighbor_bytes = base + 8;
    return view;
}

void EdgePageLayout::seal_page(std::uint8_t* page) const {
    const std::size_t payload = static_cast<std::size_t>(slots_per_page_) * slot_size_;
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0, page + kHeaderSize, static_cast<uInt>(payload)));
    store_le<std::uint32_t>(page + 4, crc);
}

bool EdgePageLayout::verify_page(const std::uint8_t* page) const {
    const std::size_t payload = static_cast<std::size_t>(slots_per_page_) * slot_size_;
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0, page + kHeaderSize, static_cast<uInt>(payload)));
    return load_le<std::uint32_t>(page + 4) == crc &&
           load_le<std::uint16_t>(page) == slots_per_page_ &&
           load_le<std::uint16_t>(page + 2) == slot_size_;
}

// ---------------------------------------------------------------------------
// IndirectionTable

IndirectionTable::IndirectionTable(std::uint64_t capacity)
    : capacity_(capacity), entries_(new Entry[capacity]) {
    if (capacity == 0) throw std::invalid_argument("IndirectionTable: zero capacity");
}

void IndirectionTable::save(std::ostream& out, std::uint64_t count) const {
    for (std::uint64_t v = 0; v < count; ++v) {
        const std::uint64_t word = entries_[v].edge_word.load(std::memory_order_acquire);
        const std::uint64_t page = word == kEmpty ? 0 : (word >> 16);
        const std::uint16_t slot = word == kEmpty ? 0 : static_cast<std::uint16_t>(word & 0xffff);
        const std::uint64_t rec = entries_[v].vector_record.load(std::memory_order_acquire);
        const std::uint8_t state = word == kEmpty ? 0 : 1;
        out.write(reinterpret_cast<const char*>(&page), 8);
        out.write(reinterpret_cast<const char*>(&slot), 2);
        out.write(reinterpret_cast<const char*>(&rec), 8);
        out.write(reinterpret_cast<const char*>(&state), 1);
    }
}

void IndirectionTable::load(std::istream& in, std::uint64_t count) {
    if (count > capacity_) throw std::invalid_argument("IndirectionTable: snapshot beyond capacity");
    for (std::uint64_t v = 0; v < count; ++v) {
        std::uint64_t page = 0, rec = 0;
        std::uint16_t slot = 0;
        std::uint8_t state = 0;
        in.read(reinterpret_cast<char*>(&page), 8);
        in.read(reinterpret_cast<char*>(&slot), 2);
        in.read(reinterpret_cast<char*>(&rec), 8);
        in.read(reinterpret_cast<char*>(&state), 1);
        if (!in) throw std::runtime_error("IndirectionTable: truncated snapshot");
        if (state) {
            entries_[v].vector_record.store(rec, std::memory_order_relaxed);
            entries_[v].edge_word.store((page << 16) | slot, std::memory_order_release);
        } else {
            entries_[v].edge_word.store(kEmpty, std::memory_order_relaxed);
            entries_[v].vector_record.store(kEmpty, std::memory_order_relaxed);
        }
    }
}

// ---------------------------------------------------------------------------
// EpochTracker

namespace {
struct TlsEpochRef {
    const void* tracker;
    int slot;
    int depth;
};
thread_local std::vector<TlsEpochRef> tl_epoch_refs;
}  // namespace

int EpochTracker::claim_slot() {
    const int slot = next_slot_.fetch_add(1, std::memory_order_relaxed);
    if (slot >= kSlots) throw std::runtime_error("EpochTracker: reader slot limit exceeded");
    return slot;
}

EpochTracker::Guard::Guard(EpochTracker* t) : tracker_(t) {
    for (TlsEpochRef& ref : tl_epoch_refs) {
        if (ref.tracker == t) {
            if (ref.depth++ == 0) {
                t->active_[ref.slot].store(t->epoch_.load(std::memory_order_seq_cst),
                                           std::memory_order_seq_cst);
            }
            return;
        }
    }
    const int slot = t->claim_slot();
    tl_epoch_refs.push_back({t, slot, 1});
    t->active_[slot].store(t->epoch_.load(std::memory_order_seq_cst), std::memory_order_seq_cst);
}

void EpochTracker::Guard::release() {
    if (!tracker_) return;
    for (TlsEpochRef& ref : tl_epoch_refs) {
        if (ref.tracker == tracker_) {
            if (--ref.depth == 0) {
                tracker_->active_[ref.slot].store(0, std::memory_order_seq_cst);
            }
            break;
        }
    }
    tracker_ = nullptr;
}

std::uint64_t EpochTracker::min_active() const {
    std::uint64_t min = ~0ull;
    const int limit = std::min(next_slot_.load(std::memory_order_relaxed), kSlots);
    for (int i = 0; i < limit; ++i) {
        const std::uint64_t e = active_[i].load(std::memory_order_seq_cst);
        if (e != 0 && e < min) min = e;
    }
    return min;
}

// ---------------------------------------------------------------------------
// PageLedger

void PageLedger::note_page(std::uint64_t page, std::uint32_t live_slots) {
    std::lock_guard lock(mutex_);
    if (live_.size() <= page) live_.resize(page + 1, 0);
    live_[page] = live_slots;
}

bool PageLedger::decrement(std::uint64_t page) {
    std::lock_guard lock(mutex_);
    if (page >= live_.size() || live_[page] == 0) {
        throw std::logic_error("PageLedger: decrement below zero");
    }
    return --live_[page] == 0;
}

void PageLedger::push_free(std::uint64_t page, std::uint64_t freed_epoch) {
    std::lock_guard lock(mutex_);
    free_.emplace_back(page, freed_epoch);
}

std::optional<std::uint64_t> PageLedger::pop_reusable(std::uint64_t min_active_epoch) {
    std::lock_guard lock(mutex_);
    for (auto it = free_.begin(); it != free_.end(); ++it) {
        if (it->second < min_active_epoch) {
            const std::uint64_t page = it->first;
            free_.erase(it);
            return page;
        }
    }
    return std::nullopt;
}

void PageLedger::reset() {
    std::lock_guard lock(mutex_);
    live_.clear();
    free_.clear();
}

std::uint64_t PageLedger::total_live() const {
    std::lock_guard lock(mutex_);
    std::uint64_t sum = 0;
    for (std::uint32_t c : live_) sum += c;
    return sum;
}

std::uint32_t PageLedger::live_slots(std::uint64_t page) const {
    std::lock_guard lock(mutex_);
    return page < live_.size() ? live_[page] : 0;
}

std::size_t PageLedger::free_count() const {
    std::lock_guard lock(mutex_);
    return free_.size();
}

std::uint64_t PageLedger::tracked_pages() const {
    std::lock_guard lock(mutex_);
    return live_.size();
}

// ---------------------------------------------------------------------------
// RmwCache

RmwCache::WriteHandle RmwCache::begin_write(PageId page) {
    std::unique_lock lock(mutex_);
    auto& slot = entries_[key_of(page)];
    if (!slot) slot = std::make_shared<Entry>();
    slot->tick = ++tick_;
    // Pin under the map lock so the entry cannot be evicted (and replaced by
    // a second entry for the same page) before the handle takes over.
    slot->pins.fetch_add(1, std::memory_order_relaxed);
    EntryPtr e = slot;
    lock.unlock();
    return WriteHandle(this, std::move(e));
}

RmwCache::EntryPtr RmwCache::find_clean(PageId page) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key_of(page));
    if (it == entries_.end()) return nullptr;
    if (it->second->dirty.load(std::memory_order_acquire) || !it->second->loaded) return nullptr;
    it->second->tick = ++tick_;
    return it->second;
}

void RmwCache::drop(PageId page) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key_of(page));
    if (it == entries_.end()) return;
    if (it->second->pins.load(std::memory_order_relaxed) == 0 &&
        !it->second->dirty.load(std::memory_order_relaxed)) {
        entries_.erase(it);
    }
}

void RmwCache::clear_role(FileRole role) {
    std::lock_guard lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end();) {
        if ((it->first >> 62) == static_cast<std::uint64_t>(role)) {
            it = entries_.erase(it);
        } else {
            ++it;
        }
    }
}

std::size_t RmwCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void RmwCache::trim() {
    std::lock_guard lock(mutex_);
    while (entries_.size() > capacity_) {
        auto victim = entries_.end();
        std::uint64_t oldest = ~0ull;
        for (auto it = entries_.begin(); it != entries_.end(); ++it) {
            if (it->second->pins.load(std::memory_order_relaxed) == 0 &&
                !it->second->dirty.load(std::memory_order_relaxed) && it->second->tick < oldest) {
                oldest = it->second->tick;
                victim = it;
            }
        }
        if (victim == entries_.end()) break;  // everything pinned or dirty
        entries_.erase(victim);
    }
}

// ---------------------------------------------------------------------------
// DecoupledStorage

DecoupledStorage::DecoupledStorage(std::shared_ptr<IoBackend> backend, const StorageConfig& config,
                                   NavisCache* cache)
    : backend_(std::move(backend)),
      config_(config),
      cache_(cache),
      layout_(config.max_degree, config.slots_per_page_override),
      rmw_(config.rmw_capacity) {
    if (config_.dim == 0) throw std::invalid_argument("DecoupledStorage: dim must be >= 1");
    if (config_.capacity == 0) throw std::invalid_argument("DecoupledStorage: capacity must be set");
    vector_stride_ = config_.dim * 4;
    if (vector_stride_ <= kPageSize) {
        vectors_per_page_ = static_cast<std::uint32_t>(kPageSize / vector_stride_);
        pages_per_record_ = 1;
    } else {
        vectors_per_page_ = 0;
        pages_per_record_ = static_cast<std::uint32_t>((vector_stride_ + kPageSize - 1) / kPageSize);
    }
    table_ = std::make_unique<IndirectionTable>(config_.capacity);
}

VertexId DecoupledStorage::allocate_vertex() {
    const VertexId id = next_id_.fetch_add(1, std::memory_order_acq_rel);
    if (id >= config_.capacity) {
        next_id_.fetch_sub(1, std::memory_order_acq_rel);
        throw std::runtime_error("DecoupledStorage: vertex capacity exhausted");
    }
    return id;
}

void DecoupledStorage::read_adjacency(std::span<const VertexId> ids, EdgeLists& out,
                                      TraversalStats* stats) {
    out.reset(ids.size(), config_.max_degree);
    if (ids.empty()) return;
    auto guard = epochs_.enter();

    struct Group {
        std::uint64_t page;
        std::vector<std::uint32_t> indices;
    };
    std::vector<EdgeLocation> locs(ids.size());
    std::vector<Group> groups;
    std::unordered_map<std::uint64_t, std::size_t> group_of;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto loc = table_->edge_location(ids[i]);
        if (!loc) throw std::out_of_range("read_adjacency: vertex not found: " + std::to_string(ids[i]));
        locs[i] = *loc;
        auto [it, fresh] = group_of.try_emplace(loc->page, groups.size());
        if (fresh) groups.push_back({loc->page, {}});
        groups[it->second].indices.push_back(static_cast<std::uint32_t>(i));
    }

    const auto copy_slot = [&](const std::uint8_t* page_bytes, std::uint32_t i) {
        const auto view = layout_.read_slot(page_bytes, locs[i].slot);
        if (view.vertex_id != ids[i]) {
            throw std::runtime_error("read_adjacency: slot/vertex mismatch for id " +
                                     std::to_string(ids[i]));
        }
        const std::uint16_t degree = std::min<std::uint16_t>(view.degree, layout_.max_degree());
        out.degrees[i] = degree;
        std::memcpy(out.neighbors.data() + static_cast<std::size_t>(i) * out.stride,
                    view.neighbor_bytes, static_cast<std::size_t>(degree) * sizeof(VertexId));
    };

    struct Miss {
        std::size_t group;
        std::unique_ptr<PageBuffer> buf;
    };
    std::vector<Miss> misses;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::uint64_t page = groups[g].page;
        // Resolve via the indirection table first, then RMW cache, then the
        // edgelist cache, and only hit storage on a double miss.
        if (RmwCache::EntryPtr e = rmw_.find_clean({FileRole::kEdge, page})) {
            for (std::uint32_t i : groups[g].indices) {
                copy_slot(e->buffer.data(), i);
                out.provenance[i] = PageProvenance::kRmw;
            }
            if (stats) stats->rmw_hits++;
            continue;
        }
        if (cache_) {
            if (auto pinned = cache_->lookup(page)) {
                for (std::uint32_t i : groups[g].indices) {
                    copy_slot(pinned->data(), i);
                    out.provenance[i] = PageProvenance::kCache;
                }
                if (stats) stats->cache_hits++;
                continue;
            }
        }
        misses.push_back({g, pool_get()});
    }

    if (!misses.empty()) {
        IoBatch batch;
        for (Miss& m : misses) {
            batch.add_read({FileRole::kEdge, groups[m.group].page}, m.buf->data());
        }
        BatchTicket ticket = backend_->submit(std::move(batch));
        CompletionSet done = backend_->wait_batch(ticket);
        for (std::size_t k = 0; k < misses.size(); ++k) {
            if (done.completions[k].status != 0) {
                throw std::runtime_error("read_adjacency: I/O error on page " +
                                         std::to_string(done.completions[k].page.page_no));
            }
        }
        for (Miss& m : misses) {
            const std::uint8_t* bytes = m.buf->data();
            if (config_.verify_checksums && !layout_.verify_page(bytes)) {
                throw std::runtime_error("read_adjacency: checksum mismatch on page " +
                                         std::to_string(groups[m.group].page));
            }
            for (std::uint32_t i : groups[m.group].indices) {
                copy_slot(bytes, i);
                out.provenance[i] = PageProvenance::kDisk;
            }
            if (cache_) cache_->admit(groups[m.group].page, bytes);
            if (stats) {
                stats->disk_reads++;
                stats->edge_pages_read++;
                const std::uint64_t slot_bytes =
                    static_cast<std::uint64_t>(layout_.slots_per_page()) * layout_.slot_size();
                stats->edgelist_bytes += slot_bytes;
                stats->padding_bytes += kPageSize - slot_bytes;
            }
            pool_put(std::move(m.buf));
        }
    }
}

std::uint16_t DecoupledStorage::read_edgelist(VertexId v, std::vector<VertexId>& out,
                                              PageProvenance* provenance, TraversalStats* stats) {
    const VertexId ids[1] = {v};
    EdgeLists lists;
    read_adjacency(std::span<const VertexId>(ids, 1), lists, stats);
    const auto span = lists.list(0);
    out.assign(span.begin(), span.end());
    if (provenance) *provenance = lists.provenance[0];
    return lists.degrees[0];
}

DecoupledStorage::PendingVectorRead DecoupledStorage::begin_read_vectors(
    std::span<const VertexId> ids) {
    PendingVectorRead p;
    p.ids.assign(ids.begin(), ids.end());
    if (ids.empty()) return p;
    p.guard = epochs_.enter();

    p.records.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::uint64_t rec = table_->vector_record(ids[i]);
        if (rec == IndirectionTable::kEmpty) {
            throw std::out_of_range("read_vectors: vertex not found: " + std::to_string(ids[i]));
        }
        p.records[i] = rec;
    }

    if (pages_per_record_ == 1) {
        // Page-deduplicated group read: co-resident records cost one I/O.
        for (std::uint64_t rec : p.records) {
            const std::uint64_t page = rec / vectors_per_page_;
            if (std::find(p.pages.begin(), p.pages.end(), page) == p.pages.end()) {
                p.pages.push_back(page);
            }
        }
    } else {
        for (std::uint64_t rec : p.records) {
            for (std::uint32_t k = 0; k < pages_per_record_; ++k) {
                p.pages.push_back(rec * pages_per_record_ + k);
            }
        }
    }
    IoBatch batch;
    for (std::uint64_t page : p.pages) {
        p.buffers.push_back(pool_get());
        batch.add_read({FileRole::kVector, page}, p.buffers.back()->data());
    }
    p.ticket = backend_->submit(std::move(batch));
    p.active = true;
    return p;
}

std::vector<FloatVector> DecoupledStorage::finish_read_vectors(PendingVectorRead& p,
                                                               TraversalStats* stats) {
    std::vector<FloatVector> result(p.ids.size());
    if (!p.active) return result;
    CompletionSet done = backend_->wait_batch(p.ticket);
    if (!done.all_ok()) throw std::runtime_error("read_vectors: I/O error");

    if (pages_per_record_ == 1) {
        for (std::size_t i = 0; i < p.ids.size(); ++i) {
            const std::uint64_t page = p.records[i] / vectors_per_page_;
            const std::size_t g = std::find(p.pages.begin(), p.pages.end(), page) - p.pages.begin();
            const std::uint32_t off = static_cast<std::uint32_t>(p.records[i] % vectors_per_page_);
            result[i].resize(config_.dim);
            std::memcpy(result[i].data(),
                        p.buffers[g]->data() + static_cast<std::size_t>(off) * vector_stride_,
                        vector_stride_);
        }
        if (stats) {
            stats->vector_pages_read += static_cast<std::uint32_t>(p.pages.size());
            stats->disk_reads += static_cast<std::uint32_t>(p.pages.size());
            const std::uint64_t data_bytes =
                static_cast<std::uint64_t>(vectors_per_page_) * vector_stride_;
            stats->unclassified_vector_bytes += p.pages.size() * data_bytes;
            stats->padding_bytes += p.pages.size() * (kPageSize - data_bytes);
        }
    } else {
        for (std::size_t i = 0; i < p.ids.size(); ++i) {
            result[i].resize(config_.dim);
            auto* dst = reinterpret_cast<std::uint8_t*>(result[i].data());
            std::uint32_t remaining = vector_stride_;
            for (std::uint32_t k = 0; k < pages_per_record_; ++k) {
                const std::uint32_t take = std::min<std::uint32_t>(remaining, kPageSize);
                std::memcpy(dst, p.buffers[i * pages_per_record_ + k]->data(), take);
                dst += take;
                remaining -= take;
            }
        }
        if (stats) {
            stats->vector_pages_read += static_cast<std::uint32_t>(p.pages.size());
            stats->disk_reads += static_cast<std::uint32_t>(p.pages.size());
            stats->unclassified_vector_bytes +=
                static_cast<std::uint64_t>(p.ids.size()) * vector_stride_;
            stats->padding_bytes += static_cast<std::uint64_t>(p.pages.size()) * kPageSize -
                                    static_cast<std::uint64_t>(p.ids.size()) * vector_stride_;
        }
    }
    if (stats) stats->vectors_loaded += static_cast<std::uint32_t>(p.ids.size());
    for (auto& b : p.buffers) pool_put(std::move(b));
    p.buffers.clear();
    p.active = false;
    p.guard = EpochTracker::Guard();
    return result;
}

std::vector<FloatVector> DecoupledStorage::read_vectors(std::span<const VertexId> ids,
                                                        TraversalStats* stats) {
    PendingVectorRead pending = begin_read_vectors(ids);
    return finish_read_vectors(pending, stats);
}

void DecoupledStorage::write_vector_record(VertexId v, const FloatVector& vec, CommitStats& stats) {
    if (vec.size() != config_.dim) throw std::invalid_argument("commit_insert: dimension mismatch");
    const std::uint64_t rec = v;  // records are id-ordered at a fixed stride
    if (pages_per_record_ == 1) {
        const std::uint64_t page = rec / vectors_per_page_;
        bool fresh = false;
        {
            std::lock_guard lock(commit_mutex_aux_);
            const std::uint64_t have = backend_->page_count(FileRole::kVector);
            if (page >= have) {
                backend_->allocate_pages(FileRole::kVector, page + 1 - have);
                fresh = true;
            }
        }
        auto handle = rmw_.begin_write({FileRole::kVector, page});
        if (!handle.loaded()) {
            if (fresh) {
                std::memset(handle.data(), 0, kPageSize);
            } else {
                IoBatch batch;
                batch.add_read({FileRole::kVector, page}, handle.data());
                BatchTicket t = backend_->submit(std::move(batch));
                if (!backend_->wait_batch(t).all_ok()) {
                    throw std::runtime_error("commit_insert: vector page read failed");
                }
            }
            handle.mark_loaded();
        }
        handle.mark_dirty();
        std::memcpy(handle.data() + (rec % vectors_per_page_) * vector_stride_, vec.data(),
                    vector_stride_);
        IoBatch batch;
        batch.add_write({FileRole::kVector, page}, handle.data());
        BatchTicket t = backend_->submit(std::move(batch));
        if (!backend_->wait_batch(t).all_ok()) {
            throw std::runtime_error("commit_insert: vector page write failed");
        }
        handle.mark_clean();
        stats.vector_pages_written += 1;
        stats.vector_bytes_written += vector_stride_;
        stats.padding_bytes_written += kPageSize - vector_stride_;
    } else {
        const std::uint64_t first_page = rec * pages_per_record_;
        {
            std::lock_guard lock(commit_mutex_aux_);
            const std::uint64_t have = backend_->page_count(FileRole::kVector);
            if (first_page + pages_per_record_ > have) {
                backend_->allocate_pages(FileRole::kVector, first_page + pages_per_record_ - have);
            }
        }
        std::vector<std::unique_ptr<PageBuffer>> bufs;
        IoBatch batch;
        const auto* src = reinterpret_cast<const std::uint8_t*>(vec.data());
        std::uint32_t remaining = vector_stride_;
        for (std::uint32_t p = 0; p < pages_per_record_; ++p) {
            bufs.push_back(pool_get());
            std::memset(bufs.back()->data(), 0, kPageSize);
            const std::uint32_t take = std::min<std::uint32_t>(remaining, kPageSize);
            std::memcpy(bufs.back()->data(), src, take);
            src += take;
            remaining -= take;
            batch.add_write({FileRole::kVector, first_page + p}, bufs.back()->data());
        }
        BatchTicket t = backend_->submit(std::move(batch));
        if (!backend_->wait_batch(t).all_ok()) {
            throw std::runtime_error("commit_insert: vector record write failed");
        }
        for (auto& b : bufs) pool_put(std::move(b));
        stats.vector_pages_written += pages_per_record_;
        stats.vector_bytes_written += vector_stride_;
        stats.padding_bytes_written +=
            static_cast<std::uint64_t>(pages_per_record_) * kPageSize - vector_stride_;
    }
    table_->publish_vector(v, rec);
}

std::vector<std::uint64_t> DecoupledStorage::acquire_destination_pages(std::size_t count) {
    std::lock_guard lock(commit_mutex_aux_);
    std::vector<std::uint64_t> pages;
    pages.reserve(count);
    const std::uint64_t min_active = epochs_.min_active();
    while (pages.size() < count) {
        // Fully invalidated pages are reused first, then the append frontier.
        if (auto reused = ledger_.pop_reusable(min_active)) {
            pages.push_back(*reused);
        } else {
            break;
        }
    }
    if (pages.size() < count) {
        const std::uint64_t first = backend_->allocate_pages(
            FileRole::kEdge, static_cast<std::uint64_t>(count - pages.size()));
        for (std::uint64_t p = first; pages.size() < count; ++p) pages.push_back(p);
    }
    return pages;
}

CommitStats DecoupledStorage::commit_insert(
    VertexId new_v, const FloatVector& vec, std::span<const VertexId> new_edges,
    const std::vector<std::pair<VertexId, std::vector<VertexId>>>& neighbor_updates) {
    CommitStats stats;
    if (new_edges.size() > config_.max_degree) {
        throw std::invalid_argument("commit_insert: new vertex degree above cap");
    }
    for (const auto& [v, list] : neighbor_updates) {
        if (list.size() > config_.max_degree) {
            throw std::invalid_argument("commit_insert: neighbor degree above cap");
        }
        if (config_.verify_checksums) {
            const auto loc = table_->edge_location(v);
            if (!loc || tl_lock_session == nullptr || tl_lock_session->owner != this ||
                tl_lock_session->pages.count(loc->page) == 0) {
                throw std::logic_error("commit_insert: page lock not held for updated vertex");
            }
        }
    }

    // (1) One vector record write, independent of R. Publishes the record
    // location before the vertex can become reachable.
    write_vector_record(new_v, vec, stats);

    // (2) Gather all modified edgelists into the minimum number of fresh pages.
    std::vector<std::pair<VertexId, std::span<const VertexId>>> slots;
    slots.reserve(1 + neighbor_updates.size());
    slots.emplace_back(new_v, new_edges);
    for (const auto& [v, list] : neighbor_updates) slots.emplace_back(v, std::span<const VertexId>(list));

    const std::uint16_t per_page = layout_.slots_per_page();
    const std::size_t page_count = (slots.size() + per_page - 1) / per_page;
    const std::vector<std::uint64_t> dest = acquire_destination_pages(page_count);

    struct PendingPage {
        std::uint64_t page;
        std::uint16_t used = 0;
        std::unique_ptr<RmwCache::WriteHandle> handle;
    };
    std::vector<PendingPage> pending;
    pending.reserve(page_count);
    std::vector<EdgeLocation> new_locs(slots.size());
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const std::size_t p = s / per_page;
        if (p == pending.size()) {
            pending.push_back({dest[p], 0, std::make_unique<RmwCache::WriteHandle>(
                                               rmw_.begin_write({FileRole::kEdge, dest[p]}))});
            pending[p].handle->mark_dirty();
            layout_.format_page(pending[p].handle->data());
        }
        const std::uint16_t slot = static_cast<std::uint16_t>(s % per_page);
        layout_.write_slot(pending[p].handle->data(), slot, slots[s].first, slots[s].second);
        pending[p].used++;
        new_locs[s] = {dest[p], slot};
    }

    // (3) One write batch for the gathered pages.
    IoBatch batch;
    for (PendingPage& p : pending) {
        layout_.seal_page(p.handle->data());
        batch.add_write({FileRole::kEdge, p.page}, p.handle->data());
    }
    BatchTicket ticket = backend_->submit(std::move(batch));
    if (!backend_->wait_batch(ticket).all_ok()) {
        throw std::runtime_error("commit_insert: edge page write failed");
    }
    for (PendingPage& p : pending) {
        p.handle->mark_loaded();
        p.handle->mark_clean();
        ledger_.note_page(p.page, p.used);
        if (cache_) cache_->refresh_in_place(p.page, p.handle->data());
    }

    // (4) Swap indirection entries; the new vertex publishes last, so a
    // traversal can only discover it once everything it needs is readable.
    std::vector<std::uint64_t> emptied;
    for (std::size_t s = 1; s < slots.size(); ++s) {
        const VertexId v = slots[s].first;
        const auto old = table_->edge_location(v);
        table_->publish_edge(v, new_locs[s]);
        if (old) {
            stats.slots_invalidated++;
            if (ledger_.decrement(old->page)) emptied.push_back(old->page);
        }
    }
    {
        const auto old = table_->edge_location(new_v);
        table_->publish_edge(new_v, new_locs[0]);
        if (old) {
            stats.slots_invalidated++;
            if (ledger_.decrement(old->page)) emptied.push_back(old->page);
        }
    }

    // (5) Fully invalidated pages: hint the cache, then free behind the
    // reclamation grace period.
    const std::uint64_t freed_epoch = epochs_.current();
    for (std::uint64_t page : emptied) {
        if (cache_) cache_->invalidate_hint(page);
        rmw_.drop({FileRole::kEdge, page});
        ledger_.push_free(page, freed_epoch);
    }
    if (!emptied.empty()) epochs_.advance();

    stats.edge_pages_written = static_cast<std::uint32_t>(pending.size());
    const std::uint64_t live_bytes = static_cast<std::uint64_t>(slots.size()) * layout_.slot_size();
    stats.edgelist_bytes_written += live_bytes;
    stats.padding_bytes_written += pending.size() * kPageSize - live_bytes;
    return stats;
}

GraphStore::PageLockGuard DecoupledStorage::lock_vertices(std::span<const VertexId> ids) {
    if (ids.empty()) return {};
    if (tl_lock_session != nullptr) {
        throw std::logic_error("lock_vertices: nested lock sessions are not allowed");
    }
    for (int attempt = 0;; ++attempt) {
        std::vector<std::uint64_t> pages;
        pages.reserve(ids.size());
        for (VertexId v : ids) {
            const auto loc = table_->edge_location(v);
            if (!loc) throw std::invalid_argument("lock_vertices: vertex not live: " + std::to_string(v));
            pages.push_back(loc->page);
        }
        std::vector<std::size_t> shards;
        shards.reserve(pages.size());
        for (std::uint64_t p : pages) shards.push_back(shard_of(p));
        std::sort(shards.begin(), shards.end());
        shards.erase(std::unique(shards.begin(), shards.end()), shards.end());

        std::vector<std::mutex*> locks;
        locks.reserve(shards.size());
        for (std::size_t s : shards) {
            lock_shards_[s].lock();
            locks.push_back(&lock_shards_[s]);
        }

        // Pages may have been relocated between resolve and lock; verify.
        bool stable = true;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto loc = table_->edge_location(ids[i]);
            if (!loc || loc->page != pages[i]) {
                stable = false;
                break;
            }
        }
        if (stable) {
            auto session = std::make_shared<LockSession>();
            session->owner = this;
            session->locks = std::move(locks);
            session->pages.insert(pages.begin(), pages.end());
            tl_lock_session = session.get();
            return PageLockGuard(std::move(session));
        }
        for (auto it = locks.rbegin(); it != locks.rend(); ++it) (*it)->unlock();
        if (attempt > 1000) {
            throw std::runtime_error("lock_vertices: could not stabilize page set");
        }
    }
}

void DecoupledStorage::initial_placement(const std::vector<std::vector<VertexId>>& adjacency,
                                         VertexId medoid) {
    const std::uint64_t n = next_id_.load(std::memory_order_acquire);
    if (adjacency.size() != n) throw std::invalid_argument("initial_placement: adjacency size mismatch");
    if (n == 0) return;
    if (medoid >= n) throw std::invalid_argument("initial_placement: medoid out of range");

    const std::uint16_t per_page = layout_.slots_per_page();
    std::vector<bool> placed(n, false), enqueued(n, false);
    std::vector<VertexId> order;
    order.reserve(n);
    std::deque<VertexId> queue;
    queue.push_back(medoid);
    enqueued[medoid] = true;
    std::uint64_t next_scan = 0;

    while (order.size() < n) {
        if (queue.empty()) {
            // Fallback scan: pick the smallest unplaced id (disconnected part).
            while (next_scan < n && placed[next_scan]) ++next_scan;
            queue.push_back(static_cast<VertexId>(next_scan));
            enqueued[next_scan] = true;
        }
        const VertexId v = queue.front();
        queue.pop_front();
        if (!placed[v]) {
            placed[v] = true;
            order.push_back(v);
        }
        for (VertexId u : adjacency[v]) {
            if (!placed[u]) {
                placed[u] = true;
                order.push_back(u);
            }
            if (!enqueued[u]) {
                enqueued[u] = true;
                queue.push_back(u);
            }
        }
    }

    // Rewrite the edge file in placement order and republish every location.
    rmw_.clear_role(FileRole::kEdge);
    backend_->truncate_pages(FileRole::kEdge, 0);
    ledger_.reset();
    const std::uint64_t total_pages = (n + per_page - 1) / per_page;
    backend_->allocate_pages(FileRole::kEdge, total_pages);

    PageBuffer buf;
    std::size_t pos = 0;
    for (std::uint64_t page = 0; page < total_pages; ++page) {
        layout_.format_page(buf.data());
        std::uint16_t used = 0;
        for (std::uint16_t slot = 0; slot < per_page && pos < order.size(); ++slot, ++pos) {
            const VertexId v = order[pos];
            layout_.write_slot(buf.data(), slot, v, adjacency[v]);
            table_->publish_edge(v, {page, slot});
            used++;
        }
        layout_.seal_page(buf.data());
        IoBatch batch;
        batch.add_write({FileRole::kEdge, page}, buf.data());
        BatchTicket t = backend_->submit(std::move(batch));
        if (!backend_->wait_batch(t).all_ok()) {
            throw std::runtime_error("initial_placement: page write failed");
        }
        ledger_.note_page(page, used);
    }
}

VerifyReport DecoupledStorage::verify() {
    VerifyReport report;
    const std::uint64_t n = next_id_.load(std::memory_order_acquire);
    std::uint64_t live_count = 0;

    std::unordered_map<std::uint64_t, std::unique_ptr<PageBuffer>> page_cache;
    const auto page_bytes = [&](std::uint64_t page) -> const std::uint8_t* {
        auto it = page_cache.find(page);
        if (it == page_cache.end()) {
            auto buf = std::make_unique<PageBuffer>();
            IoBatch batch;
            batch.add_read({FileRole::kEdge, page}, buf->data());
            BatchTicket t = backend_->submit(std::move(batch));
            if (!backend_->wait_batch(t).all_ok()) return nullptr;
            it = page_cache.emplace(page, std::move(buf)).first;
        }
        return it->second->data();
    };

    for (VertexId v = 0; v < n; ++v) {
        const auto loc = table_->edge_location(v);
        if (!loc) continue;
        live_count++;
        const std::uint8_t* bytes = page_bytes(loc->page);
        if (!bytes) {
            report.fail("io error reading page " + std::to_string(loc->page));
            continue;
        }
        if (!layout_.verify_page(bytes)) {
            report.fail("checksum mismatch on page " + std::to_string(loc->page));
            continue;
        }
        const auto view = layout_.read_slot(bytes, loc->slot);
        if (view.vertex_id != v) {
            report.fail("indirection mismatch: vertex " + std::to_string(v) + " maps to slot holding " +
                        std::to_string(view.vertex_id));
            continue;
        }
        if (view.degree > config_.max_degree) {
            report.fail("degree cap exceeded at vertex " + std::to_string(v));
            continue;
        }
        for (std::uint16_t i = 0; i < view.degree; ++i) {
            VertexId u;
            std::memcpy(&u, view.neighbor_bytes + static_cast<std::size_t>(i) * 4, 4);
            if (u >= n || !table_->live(u)) {
                report.fail("dangling edge " + std::to_string(v) + " -> " + std::to_string(u));
                break;
            }
        }
        if (table_->vector_record(v) == IndirectionTable::kEmpty) {
            report.fail("live vertex without vector record: " + std::to_string(v));
        }
    }

    if (ledger_.total_live() != live_count) {
        report.fail("ledger conservation violated: " + std::to_string(ledger_.total_live()) +
                    " ledger vs " + std::to_string(live_count) + " live vertices");
    }
    return report;
}

void DecoupledStorage::flush() {
    backend_->flush(FileRole::kEdge);
    backend_->flush(FileRole::kVector);
}

void DecoupledStorage::save_state(std::ostream& out) const {
    table_->save(out, next_id_.load(std::memory_order_acquire));
}

void DecoupledStorage::load_state(std::istream& in, std::uint64_t vertex_count) {
    table_->load(in, vertex_count);
    next_id_.store(static_cast<VertexId>(vertex_count), std::memory_order_release);
    // Rebuild the ledger from the authoritative table.
    const std::uint64_t pages = backend_->page_count(FileRole::kEdge);
    std::vector<std::uint32_t> live(pages, 0);
    for (VertexId v = 0; v < vertex_count; ++v) {
        if (const auto loc = table_->edge_location(v)) live[loc->page]++;
    }
    ledger_.reset();
    for (std::uint64_t p = 0; p < pages; ++p) {
        ledger_.note_page(p, live[p]);
        if (live[p] == 0) ledger_.push_free(p, 0);
    }
}

}  // namespace navis
