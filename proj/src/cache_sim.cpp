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

#include "navis/cache_sim.hpp"

#include <list>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "navis/navis_cache.hpp"

namespace navis {

CachePolicy cache_policy_from_string(const std::string& name) {
    if (name == "navis") return CachePolicy::kNavis;
    if (name == "lru") return CachePolicy::kLru;
    if (name == "lfu") return CachePolicy::kLfu;
    if (name == "clock") return CachePolicy::kClock;
    throw std::invalid_argument("unknown cache policy: " + name);
}

std::string to_string(CachePolicy policy) {
    switch (policy) {
        case CachePolicy::kNavis: return "navis";
        case CachePolicy::kLru: return "lru";
        case CachePolicy::kLfu: return "lfu";
        case CachePolicy::kClock: return "clock";
    }
    return "?";
}

namespace {

TraceReport replay_navis(std::span<const std::uint64_t> trace, std::size_t capacity,
                         std::uint64_t seed) {
    CacheConfig config;
    config.capacity_pages = std::max<std::size_t>(capacity, 2);
    config.rng_seed = seed;
    NavisCache cache(config);
    std::vector<std::uint8_t> page(kPageSize, 0);
    TraceReport report;
    for (std::uint64_t p : trace) {
        report.accesses++;
        if (cache.lookup(p)) {
            report.hits++;
        } else {
            cache.admit(p, page.data());
        }
    }
    report.frozen_evictions = cache.metrics().frozen_evictions.load();
    return report;
}

TraceReport replay_lru(std::span<const std::uint64_t> trace, std::size_t capacity) {
    std::list<std::uint64_t> order;  // front = MRU
    std::unordered_map<std::uint64_t, std::list<std::uint64_t>::iterator> where;
    TraceReport report;
    for (std::uint64_t p : trace) {
        report.accesses++;
        auto it = where.find(p);
        if (it != where.end()) {
            report.hits++;
            order.splice(order.begin(), order, it->second);
            continue;
        }
        if (where.size() >= capacity) {
            where.erase(order.back());
            order.pop_back();
        }
        order.push_front(p);
        where[p] = order.begin();
    }
    return report;
}

TraceReport replay_lfu(std::span<const std::uint64_t> trace, std::size_t capacity) {
    // Victim: lowest frequency, oldest insertion on ties.
    struct Entry {
        std::uint64_t freq;
        std::uint64_t arrival;
    };
    std::unordered_map<std::uint64_t, Entry> cached;
    std::uint64_t tick = 0;
    TraceReport report;
    for (std::uint64_t p : trace) {
        report.accesses++;
        ++tick;
        auto it = cached.find(p);
        if (it != cached.end()) {
            report.hits++;
            it->second.freq++;
            continue;
        }
        if (cached.size() >= capacity) {
            auto victim = cached.begin();
            for (auto v = cached.begin(); v != cached.end(); ++v) {
                if (v->second.freq < victim->second.freq ||
                    (v->second.freq == victim->second.freq &&
                     v->second.arrival < victim->second.arrival)) {
                    victim = v;
                }
            }
            cached.erase(victim);
        }
        cached.emplace(p, Entry{1, tick});
    }
    return report;
}

TraceReport replay_clock(std::span<const std::uint64_t> trace, std::size_t capacity) {
    struct Slot {
        std::uint64_t page;
        bool referenced;
    };
    std::vector<Slot> slots;
    std::unordered_map<std::uint64_t, std::size_t> where;
    std::size_t hand = 0;
    TraceReport report;
    for (std::uint64_t p : trace) {
        report.accesses++;
        auto it = where.find(p);
        if (it != where.end()) {
            report.hits++;
            slots[it->second].referenced = true;
            continue;
        }
        if (slots.size() < capacity) {
            where[p] = slots.size();
            slots.push_back({p, false});
            continue;
        }
        while (slots[hand].referenced) {
            slots[hand].referenced = false;
            hand = (hand + 1) % slots.size();
        }
        where.erase(slots[hand].page);
        slots[hand] = {p, false};
        where[p] = hand;
        hand = (hand + 1) % slots.size();
    }
    return report;
}

}  // namespace

TraceReport replay_trace(CachePolicy policy, std::span<const std::uint64_t> trace,
                         std::size_t capacity, std::uint64_t seed) {
    if (capacity == 0) throw std::invalid_argument("replay_trace: capacity must be positive");
    switch (policy) {
        case CachePolicy::kNavis: return replay_navis(trace, capacity, seed);
        case CachePolicy::kLru: return replay_lru(trace, capacity);
        case CachePolicy::kLfu: return replay_lfu(trace, capacity);
        case CachePolicy::kClock: return replay_clock(trace, capacity);
    }
    throw std::logic_error("replay_trace: unreachable");
}

std::vector<std::uint64_t> gen_skewed_trace(std::size_t length, std::uint64_t total_pages,
                                            std::uint64_t hot_pages, double hot_fraction,
                                            std::uint64_t seed) {
    if (hot_pages > total_pages) throw std::invalid_argument("gen_skewed_trace: hot set too large");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::uint64_t> hot(0, hot_pages - 1);
    std::uniform_int_distribution<std::uint64_t> cold(hot_pages, total_pages - 1);
    std::vector<std::uint64_t> trace;
    trace.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
        trace.push_back(coin(rng) < hot_fraction ? hot(rng) : cold(rng));
    }
    return trace;
}

}  // namespace navis
