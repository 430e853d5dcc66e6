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

#include "navis/navis_cache.hpp"

#include <cstring>

namespace navis {

NavisCache::NavisCache(const CacheConfig& config) : config_(config), rng_(config.rng_seed) {
    config_.validate();
    entries_.reserve(config_.capacity_pages * 2);
    frozen_.reserve(config_.frozen_slots());
}

std::optional<NavisCache::PinnedPage> NavisCache::lookup(std::uint64_t page_no) {
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(page_no);
        if (it == entries_.end() || it->second->condemned.load(std::memory_order_relaxed)) {
            metrics_.misses.fetch_add(1, std::memory_order_relaxed);
            return std::nullopt;
        }
        const EntryPtr& e = it->second;
        if (e->region == Region::kFrozen) {
            // Hot path: frozen hits never mutate structure.
            e->pins.fetch_add(1, std::memory_order_acquire);
            PinnedPage p;
            p.entry_ = e;
            p.buffer_ = e->buffer;
            metrics_.hits.fetch_add(1, std::memory_order_relaxed);
            return p;
        }
    }

    // Window hit: needs the LRU touch and possibly a promotion.
    std::unique_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it == entries_.end() || it->second->condemned.load(std::memory_order_relaxed)) {
        metrics_.misses.fetch_add(1, std::memory_order_relaxed);
        return std::nullopt;
    }
    EntryPtr e = it->second;
    e->pins.fetch_add(1, std::memory_order_acquire);
    PinnedPage p;
    p.entry_ = e;
    p.buffer_ = e->buffer;
    metrics_.hits.fetch_add(1, std::memory_order_relaxed);
    if (e->region == Region::kWindow) {
        window_lru_.splice(window_lru_.begin(), window_lru_, e->lru_it);
        if (e->window_hits < 2) e->window_hits++;
        if (e->window_hits >= 2) {
            bool room = true;
            if (frozen_.size() >= config_.frozen_slots()) {
                room = evict_frozen_random_locked().has_value();
            }
            if (room) {
                window_lru_.erase(e->lru_it);
                e->region = Region::kFrozen;
                e->frozen_idx = frozen_.size();
                frozen_.push_back(e);
                metrics_.promotions.fetch_add(1, std::memory_order_relaxed);
            } else {
                metrics_.abandoned_promotions.fetch_add(1, std::memory_order_relaxed);
            }
        }
    }
    return p;
}

void NavisCache::admit(std::uint64_t page_no, const std::uint8_t* buf) {
    std::unique_lock lock(mutex_);
    if (entries_.count(page_no)) return;  // duplicate admit is a no-op

    auto e = std::make_shared<Entry>();
    e->page_no = page_no;
    e->buffer = std::make_shared<PageBuffer>();
    std::memcpy(e->buffer->data(), buf, kPageSize);
    e->region = Region::kWindow;
    e->window_hits = 1;
    window_lru_.push_front(page_no);
    e->lru_it = window_lru_.begin();
    entries_.emplace(page_no, e);

    while (window_lru_.size() > config_.window_slots()) {
        // Discard the least-recent unpinned entry; skip pinned ones.
        bool evicted = false;
        for (auto it = std::prev(window_lru_.end());; --it) {
            const EntryPtr& victim = entries_.at(*it);
            if (victim.get() != e.get() && victim->pins.load(std::memory_order_relaxed) == 0) {
                EntryPtr dead = victim;
                window_lru_.erase(dead->lru_it);
                entries_.erase(dead->page_no);
                evicted = true;
                break;
            }
            if (it == window_lru_.begin()) break;
        }
        if (!evicted) {
            // Every other window entry is pinned; abandon this admission to
            // keep the capacity bound.
            window_lru_.erase(e->lru_it);
            entries_.erase(page_no);
            break;
        }
    }
}

void NavisCache::detach_locked(const EntryPtr& e) {
    if (e->region == Region::kWindow) {
        window_lru_.erase(e->lru_it);
    } else {
        const std::size_t idx = e->frozen_idx;
        frozen_[idx] = frozen_.back();
        frozen_[idx]->frozen_idx = idx;
        frozen_.pop_back();
    }
    entries_.erase(e->page_no);
}

void NavisCache::invalidate_hint(std::uint64_t page_no) {
    std::unique_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it == entries_.end()) return;
    EntryPtr e = it->second;
    e->condemned.store(true, std::memory_order_relaxed);
    detach_locked(e);  // lookups miss immediately; memory freed at last unpin
    metrics_.hint_invalidations.fetch_add(1, std::memory_order_relaxed);
}

void NavisCache::refresh_in_place(std::uint64_t page_no, const std::uint8_t* buf) {
    std::unique_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it == entries_.end()) return;
    // Copy-on-refresh: pinned readers finish on the old buffer.
    auto fresh = std::make_shared<PageBuffer>();
    std::memcpy(fresh->data(), buf, kPageSize);
    it->second->buffer = std::move(fresh);
}

std::optional<std::uint64_t> NavisCache::evict_frozen_random_locked() {
    if (frozen_.empty()) return std::nullopt;
    last_probes_ = 0;
    for (int probe = 0; probe < config_.max_probes; ++probe) {
        const std::size_t idx = rng_() % frozen_.size();
        ++last_probes_;
        const EntryPtr e = frozen_[idx];
        if (e->pins.load(std::memory_order_relaxed) == 0) {
            const std::uint64_t page = e->page_no;
            detach_locked(e);
            metrics_.frozen_evictions.fetch_add(1, std::memory_order_relaxed);
            return page;
        }
    }
    return std::nullopt;
}

void NavisCache::clear() {
    std::unique_lock lock(mutex_);
    for (auto& [page, e] : entries_) e->condemned.store(true, std::memory_order_relaxed);
    entries_.clear();
    window_lru_.clear();
    frozen_.clear();
}

std::optional<std::uint64_t> NavisCache::evict_frozen_random() {
    std::unique_lock lock(mutex_);
    return evict_frozen_random_locked();
}

std::optional<NavisCache::Region> NavisCache::region_of(std::uint64_t page_no) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it == entries_.end()) return std::nullopt;
    return it->second->region;
}

std::size_t NavisCache::window_size() const {
    std::shared_lock lock(mutex_);
    return window_lru_.size();
}

std::size_t NavisCache::frozen_size() const {
    std::shared_lock lock(mutex_);
    return frozen_.size();
}

bool NavisCache::pin_for_test(std::uint64_t page_no) {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it == entries_.end()) return false;
    it->second->pins.fetch_add(1, std::memory_order_relaxed);
    return true;
}

void NavisCache::unpin_for_test(std::uint64_t page_no) {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(page_no);
    if (it != entries_.end()) it->second->pins.fetch_sub(1, std::memory_order_relaxed);
}

}  // namespace navis
