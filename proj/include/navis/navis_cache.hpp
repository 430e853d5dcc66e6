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
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "navis/io_backend.hpp"

namespace navis {

struct CacheConfig {
    std::size_t capacity_pages = 1024;
    double frozen_fraction = 0.9;
    double window_fraction = 0.1;
    int max_probes = 8;
    std::uint64_t rng_seed = 0x9e3779b97f4a7c15ull;

    std::size_t window_slots() const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(window_fraction * capacity_pages + 0.5));
    }
    std::size_t frozen_slots() const { return capacity_pages - window_slots(); }

    void validate() const {
        if (capacity_pages < 2) throw std::invalid_argument("CacheConfig: capacity must be >= 2");
        if (frozen_fraction + window_fraction != 1.0) {
            throw std::invalid_argument("CacheConfig: fractions must sum to 1");
        }
    }
};

struct CacheMetrics {
    std::atomic<std::uint64_t> hits{0};
    std::atomic<std::uint64_t> misses{0};
    std::atomic<std::uint64_t> promotions{0};
    std::atomic<std::uint64_t> abandoned_promotions{0};
    std::atomic<std::uint64_t> hint_invalidations{0};
    std::atomic<std::uint64_t> frozen_evictions{0};
};

/// Edgelist page cache: a mostly-frozen region holding the hot set near the
/// entrance graph, fed by a small LRU admission window with twice-seen
/// promotion. Eviction from the frozen region is by bounded random probing;
/// relocated pages are dropped via hints from the indirection layer.
class NavisCache {
public:
    enum class Region : std::uint8_t { kWindow, kFrozen };

    struct Entry {
        std::uint64_t page_no = 0;
        std::shared_ptr<PageBuffer> buffer;  // swapped wholesale on refresh
        std::atomic<int> pins{0};
        std::atomic<bool> condemned{false};
        Region region = Region::kWindow;
        std::uint8_t window_hits = 0;  // saturates at 2
        std::list<std::uint64_t>::iterator lru_it{};
        std::size_t frozen_idx = 0;
    };
    using EntryPtr = std::shared_ptr<Entry>;

    explicit NavisCache(const CacheConfig& config);

    /// Read handle; keeps a buffer snapshot alive and the entry pinned.
    class PinnedPage {
    public:
        PinnedPage() = default;
        ~PinnedPage() { release(); }
        PinnedPage(const PinnedPage&) = delete;
        PinnedPage& operator=(const PinnedPage&) = delete;
        PinnedPage(PinnedPage&& o) noexcept { swap(o); }
        PinnedPage& operator=(PinnedPage&& o) noexcept {
            release();
            swap(o);
            return *this;
        }

        const std::uint8_t* data() const { return buffer_->data(); }
        explicit operator bool() const { return entry_ != nullptr; }

        void release() {
            if (entry_) entry_->pins.fetch_sub(1, std::memory_order_release);
            entry_.reset();
            buffer_.reset();
        }

    private:
        friend class NavisCache;
        void swap(PinnedPage& o) {
            std::swap(entry_, o.entry_);
            std::swap(buffer_, o.buffer_);
        }
        EntryPtr entry_;
        std::shared_ptr<PageBuffer> buffer_;
    };

    std::optional<PinnedPage> lookup(std::uint64_t page_no);
    void admit(std::uint64_t page_no, const std::uint8_t* buf);
    void invalidate_hint(std::uint64_t page_no);
    void refresh_in_place(std::uint64_t page_no, const std::uint8_t* buf);
    void clear();

    // Exposed for tests; also invoked internally when a promotion needs room.
    // Returns the evicted page, or nullopt if every probe hit a pinned entry.
    std::optional<std::uint64_t> evict_frozen_random();

    std::optional<Region> region_of(std::uint64_t page_no) const;
    std::size_t window_size() const;
    std::size_t frozen_size() const;

    const CacheMetrics& metrics() const { return metrics_; }
    const CacheConfig& config() const { return config_; }

    // Test hooks: pin/unpin an entry without taking a read handle.
    bool pin_for_test(std::uint64_t page_no);
    void unpin_for_test(std::uint64_t page_no);
    int last_probe_count() const { return last_probes_; }

private:
    std::optional<std::uint64_t> evict_frozen_random_locked();
    void detach_locked(const EntryPtr& e);

    CacheConfig config_;
    CacheMetrics metrics_;

    mutable std::shared_mutex mutex_;  // structure: map, regions, LRU list
    std::unordered_map<std::uint64_t, EntryPtr> entries_;
    std::list<std::uint64_t> window_lru_;  // front = MRU
    std::vector<EntryPtr> frozen_;
    std::mt19937_64 rng_;
    int last_probes_ = 0;
};

}  // namespace navis
