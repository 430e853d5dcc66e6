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

#include <algorithm>
#include <random>

#include "navis/core.hpp"

using namespace navis;

TEST_CASE("l2_distance basics") {
    CHECK(l2_distance(FloatVector{0, 0}, FloatVector{0, 0}) == 0.0f);
    CHECK(l2_distance(FloatVector{1, 2}, FloatVector{1, 2}) == 0.0f);
    CHECK(l2_distance(FloatVector{0, 3}, FloatVector{4, 0}) == 25.0f);
    CHECK_THROWS_AS(l2_distance(FloatVector{1}, FloatVector{1, 2}), std::invalid_argument);
}

TEST_CASE("l2_distance symmetry and identity on random vectors") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-5, 5);
    for (int t = 0; t < 200; ++t) {
        FloatVector a(8), b(8);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng);
        CHECK(l2_distance(a, b) == l2_distance(b, a));
        CHECK(l2_distance(a, a) == 0.0f);
    }
}

TEST_CASE("pool_insert examples") {
    CandidatePool pool(2);
    CHECK(pool.insert({5, 1.0f, false}));
    REQUIRE(pool.size() == 1);
    CHECK(pool.entries()[0].vertex == 5);

    CHECK(pool.insert({7, 2.0f, false}));
    CHECK_FALSE(pool.insert({9, 3.0f, false}));  // farther than all, pool full
    REQUIRE(pool.size() == 2);
    CHECK(pool.entries()[1].vertex == 7);

    CHECK(pool.insert({9, 1.5f, false}));  // evicts (7, 2.0)
    REQUIRE(pool.size() == 2);
    CHECK(pool.entries()[0].vertex == 5);
    CHECK(pool.entries()[1].vertex == 9);
    CHECK_FALSE(pool.contains(7));
}

TEST_CASE("pool rejects duplicates") {
    CandidatePool pool(4);
    CHECK(pool.insert({1, 1.0f, false}));
    CHECK_FALSE(pool.insert({1, 0.5f, false}));
    CHECK(pool.size() == 1);
    CHECK(pool.entries()[0].pq_dist == 1.0f);
}

TEST_CASE("pool stays sorted and duplicate-free under random insert streams") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<VertexId> vid(0, 30);
    std::uniform_real_distribution<float> dist(0, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t cap = 1 + rng() % 8;
        CandidatePool pool(cap);
        for (int i = 0; i < 40; ++i) {
            pool.insert({vid(rng), dist(rng), false});
            CHECK(pool.size() <= cap);
            std::vector<VertexId> ids;
            for (std::size_t k = 1; k < pool.entries().size(); ++k) {
                CHECK(candidate_less(pool.entries()[k - 1], pool.entries()[k]));
            }
            for (const Candidate& c : pool.entries()) ids.push_back(c.vertex);
            std::sort(ids.begin(), ids.end());
            CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
        }
    }
}

TEST_CASE("pool matches sort-and-dedup oracle on unique-id streams") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<float> dist(0, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t cap = 1 + rng() % 8;
        CandidatePool pool(cap);
        std::vector<Candidate> stream;
        for (VertexId v = 0; v < 20; ++v) stream.push_back({v, dist(rng), false});
        std::shuffle(stream.begin(), stream.end(), rng);
        for (const Candidate& c : stream) pool.insert(c);

        std::sort(stream.begin(), stream.end(), candidate_less);
        const std::size_t expect = std::min(cap, stream.size());
        REQUIRE(pool.size() == expect);
        for (std::size_t i = 0; i < expect; ++i) {
            CHECK(pool.entries()[i].vertex == stream[i].vertex);
            CHECK(pool.entries()[i].pq_dist == stream[i].pq_dist);
        }
    }
}

TEST_CASE("pool retained set is insertion-order independent for unique ids") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<float> dist(0, 10);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Candidate> cands;
        for (VertexId v = 0; v < 12; ++v) cands.push_back({v, dist(rng), false});
        CandidatePool a(5), b(5);
        for (const Candidate& c : cands) a.insert(c);
        std::shuffle(cands.begin(), cands.end(), rng);
        for (const Candidate& c : cands) b.insert(c);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.entries()[i].vertex == b.entries()[i].vertex);
        }
    }
}
