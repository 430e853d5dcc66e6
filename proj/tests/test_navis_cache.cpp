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

#include <doctest.h>

#include <cstring>
#include <thread>

#include "navis/cache_sim.hpp"
#include "navis/navis_cache.hpp"

using namespace navis;

namespace {

std::vector<std::uint8_t> page_with(std::uint8_t fill) {
    return std::vector<std::uint8_t>(kPageSize, fill);
}

NavisCache make_cache(std::size_t capacity, int max_probes = 8, std::uint64_t seed = 1) {
    CacheConfig cfg;
    cfg.capacity_pages = capacity;
    cfg.max_probes = max_probes;
    cfg.rng_seed = seed;
    return NavisCache(cfg);
}

}  // namespace

TEST_CASE("window sizing: max(1, round(0.1 * capacity))") {
    CHECK(make_cache(2).config().window_slots() == 1);
    CHECK(make_cache(100).config().window_slots() == 10);
    CHECK(make_cache(14).config().window_slots() == 1);
    CHECK(make_cache(15).config().window_slots() == 2);
}

TEST_CASE("miss on empty cache") {
    auto cache = make_cache(10);
    CHECK_FALSE(cache.lookup(1).has_value());
    CHECK(cache.metrics().misses.load() == 1);
}

TEST_CASE("twice-seen within the window promotes to frozen") {
    auto cache = make_cache(20);  // window 2, frozen 18
    cache.admit(7, page_with(1).data());
    CHECK(cache.region_of(7) == NavisCache::Region::kWindow);
    auto hit = cache.lookup(7);  // second access
    REQUIRE(hit.has_value());
    CHECK(cache.region_of(7) == NavisCache::Region::kFrozen);
    CHECK(cache.metrics().promotions.load() == 1);
}

TEST_CASE("single-access pages are evicted from the window without promotion") {
    auto cache = make_cache(20);  // window 2
    cache.admit(1, page_with(1).data());
    cache.admit(2, page_with(2).data());
    cache.admit(3, page_with(3).data());  // evicts page 1 (LRU order)
    CHECK_FALSE(cache.region_of(1).has_value());
    CHECK_FALSE(cache.lookup(1).has_value());
    CHECK(cache.metrics().promotions.load() == 0);
    CHECK(cache.frozen_size() == 0);
}

TEST_CASE("duplicate admit is a no-op; admitting a frozen page is a no-op") {
    auto cache = make_cache(20);
    cache.admit(5, page_with(1).data());
    cache.lookup(5);  // promote
    REQUIRE(cache.region_of(5) == NavisCache::Region::kFrozen);
    cache.admit(5, page_with(9).data());
    CHECK(cache.region_of(5) == NavisCache::Region::kFrozen);
    auto hit = cache.lookup(5);
    REQUIRE(hit.has_value());
    CHECK((*hit).data()[0] == 1);  // old bytes kept
}

TEST_CASE("pinned window tail is skipped; next LRU victim evicted") {
    auto cache = make_cache(20);  // window 2
    cache.admit(1, page_with(1).data());
    cache.admit(2, page_with(2).data());
    REQUIRE(cache.pin_for_test(1));  // tail is page 1
    cache.admit(3, page_with(3).data());
    CHECK(cache.region_of(1).has_value());   // pinned tail survived
    CHECK_FALSE(cache.region_of(2).has_value());  // next victim evicted
    CHECK(cache.region_of(3).has_value());
    cache.unpin_for_test(1);
}

TEST_CASE("random frozen eviction: all unpinned evicts in one probe") {
    auto cache = make_cache(20, 8, 77);
    for (std::uint64_t p = 0; p < 5; ++p) {
        cache.admit(p, page_with(static_cast<std::uint8_t>(p)).data());
        cache.lookup(p);
    }
    REQUIRE(cache.frozen_size() == 5);
    auto victim = cache.evict_frozen_random();
    REQUIRE(victim.has_value());
    CHECK(cache.last_probe_count() == 1);
    CHECK(cache.frozen_size() == 4);
    CHECK(cache.metrics().frozen_evictions.load() == 1);
}

TEST_CASE("random frozen eviction probes past pinned entries") {
    auto cache = make_cache(20, 8, /*seed=*/123);
    for (std::uint64_t p = 0; p < 6; ++p) {
        cache.admit(p, page_with(static_cast<std::uint8_t>(p)).data());
        cache.lookup(p);
    }
    REQUIRE(cache.frozen_size() == 6);
    // Pin everything except one entry: the survivor must be chosen after
    // skipping pinned probes.
    for (std::uint64_t p = 0; p < 6; ++p) {
        if (p != 4) REQUIRE(cache.pin_for_test(p));
    }
    auto victim = cache.evict_frozen_random();
    REQUIRE(victim.has_value());
    CHECK(*victim == 4);
    CHECK(cache.last_probe_count() >= 1);
    for (std::uint64_t p = 0; p < 6; ++p) {
        if (p != 4) cache.unpin_for_test(p);
    }
}

TEST_CASE("all probes pinned: eviction returns none and promotion is abandoned") {
    auto cache = make_cache(12, 8, 5);  // window 1, frozen 11
    // Fill frozen with 3 pinned pages.
    for (std::uint64_t p = 0; p < 3; ++p) {
        cache.admit(p, page_with(static_cast<std::uint8_t>(p)).data());
        cache.lookup(p);
        REQUIRE(cache.pin_for_test(p));
    }
    CHECK_FALSE(cache.evict_frozen_random().has_value());
    CHECK(cache.last_probe_count() == 8);
    for (std::uint64_t p = 0; p < 3; ++p) cache.unpin_for_test(p);
}

TEST_CASE("abandoned promotion keeps the page in the window") {
    CacheConfig cfg;
    cfg.capacity_pages = 3;  // window 1, frozen 2
    cfg.max_probes = 8;
    cfg.rng_seed = 3;
    NavisCache cache(cfg);
    cache.admit(10, page_with(1).data());
    cache.lookup(10);
    cache.admit(11, page_with(2).data());
    cache.lookup(11);
    REQUIRE(cache.frozen_size() == 2);
    REQUIRE(cache.pin_for_test(10));
    REQUIRE(cache.pin_for_test(11));

    cache.admit(12, page_with(3).data());
    cache.lookup(12);  // wants promotion; every frozen probe is pinned
    CHECK(cache.region_of(12) == NavisCache::Region::kWindow);
    CHECK(cache.metrics().abandoned_promotions.load() >= 1);
    cache.unpin_for_test(10);
    cache.unpin_for_test(11);
}

TEST_CASE("invalidate hint removes cached pages immediately") {
    auto cache = make_cache(20);
    cache.admit(4, page_with(1).data());
    cache.invalidate_hint(4);
    CHECK_FALSE(cache.lookup(4).has_value());
    CHECK(cache.metrics().hint_invalidations.load() == 1);

    cache.invalidate_hint(999);  // uncached: no-op
    CHECK(cache.metrics().hint_invalidations.load() == 1);
}

TEST_CASE("hint on a pinned page condemns it; readers keep the old buffer") {
    auto cache = make_cache(20);
    cache.admit(4, page_with(7).data());
    auto pinned = cache.lookup(4);
    REQUIRE(pinned.has_value());
    cache.invalidate_hint(4);
    CHECK_FALSE(cache.lookup(4).has_value());  // misses immediately
    CHECK((*pinned).data()[0] == 7);           // in-flight reader unaffected
}

TEST_CASE("refresh_in_place swaps bytes without changing the region") {
    auto cache = make_cache(20);
    cache.admit(4, page_with(1).data());
    cache.lookup(4);
    REQUIRE(cache.region_of(4) == NavisCache::Region::kFrozen);

    auto before = cache.lookup(4);  // pinned reader on the old buffer
    cache.refresh_in_place(4, page_with(9).data());
    CHECK(cache.region_of(4) == NavisCache::Region::kFrozen);
    CHECK((*before).data()[0] == 1);  // copy-on-refresh
    auto after = cache.lookup(4);
    CHECK((*after).data()[0] == 9);

    cache.refresh_in_place(12345, page_with(1).data());  // absent: no-op
}

TEST_CASE("capacity bound holds at all times") {
    auto cache = make_cache(10, 8, 9);
    for (std::uint64_t p = 0; p < 100; ++p) {
        cache.admit(p, page_with(static_cast<std::uint8_t>(p)).data());
        if (p % 3 == 0) cache.lookup(p);
        CHECK(cache.window_size() + cache.frozen_size() <= 10);
    }
}

TEST_CASE("every frozen entry was observed at least twice in the window") {
    auto cache = make_cache(30, 8, 17);
    // Audit log: count accesses per page while driving a random trace.
    std::mt19937_64 rng(4);
    std::unordered_map<std::uint64_t, int> accesses;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t p = rng() % 60;
        accesses[p]++;
        if (!cache.lookup(p)) cache.admit(p, page_with(1).data());
    }
    for (std::uint64_t p = 0; p < 60; ++p) {
        if (cache.region_of(p) == NavisCache::Region::kFrozen) {
            CHECK(accesses[p] >= 2);
        }
    }
}

TEST_CASE("scan resistance: a one-pass cold scan evicts nothing frozen") {
    auto cache = make_cache(50, 8, 21);  // window 5, frozen 45
    for (std::uint64_t p = 0; p < 20; ++p) {
        cache.admit(p, page_with(1).data());
        cache.lookup(p);  // promote the hot set
    }
    REQUIRE(cache.frozen_size() == 20);
    const auto evictions_before = cache.metrics().frozen_evictions.load();
    for (std::uint64_t p = 1000; p < 3000; ++p) {
        if (!cache.lookup(p)) cache.admit(p, page_with(2).data());
    }
    CHECK(cache.metrics().frozen_evictions.load() == evictions_before);
    for (std::uint64_t p = 0; p < 20; ++p) {
        CHECK(cache.region_of(p) == NavisCache::Region::kFrozen);
    }
}

TEST_CASE("skewed trace: navis beats plain LRU of equal capacity") {
    // 80/20 skew toward a hot set larger than the window, smaller than frozen.
    const auto trace = gen_skewed_trace(60000, 2000, 80, 0.8, 99);
    const auto navis = replay_trace(CachePolicy::kNavis, trace, 100, 7);
    const auto lru = replay_trace(CachePolicy::kLru, trace, 100);
    MESSAGE("navis=", navis.hit_rate(), " lru=", lru.hit_rate());
    CHECK(navis.hit_rate() > lru.hit_rate());
}

TEST_CASE("concurrent lookups and admissions stay consistent") {
    auto cache = make_cache(64, 8, 31);
    std::vector<std::thread> threads;
    std::atomic<bool> failed{false};
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            std::mt19937_64 rng(t);
            for (int i = 0; i < 20000; ++i) {
                const std::uint64_t p = rng() % 200;
                auto hit = cache.lookup(p);
                if (!hit) {
                    auto page = page_with(static_cast<std::uint8_t>(p));
                    cache.admit(p, page.data());
                } else if ((*hit).data()[0] != static_cast<std::uint8_t>(p)) {
                    failed = true;
                }
                if (i % 512 == 0) cache.invalidate_hint(rng() % 200);
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK_FALSE(failed.load());
    CHECK(cache.window_size() + cache.frozen_size() <= 64);
}
