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

#include <unistd.h>

#include <cstdio>
#include <fstream>

#include "navis/cache_sim.hpp"
#include "navis/dataset.hpp"

using namespace navis;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const char* tag) {
        static int counter = 0;
        path = "/tmp/navis_ds_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
               "_" + tag;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

// Second, minimal fvecs parser used as an independent cross-check.
std::vector<FloatVector> naive_fvecs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<FloatVector> out;
    while (true) {
        std::int32_t dim;
        if (!in.read(reinterpret_cast<char*>(&dim), 4)) break;
        FloatVector v(dim);
        in.read(reinterpret_cast<char*>(v.data()), 4ll * dim);
        out.push_back(v);
    }
    return out;
}

}  // namespace

TEST_CASE("fvecs: one record round-trips bit-exactly") {
    TempFile f("one.fvecs");
    std::vector<FloatVector> data{{1.5f, -2.25f, 0.0f}};
    write_fvecs(f.path, data);
    auto back = read_fvecs(f.path);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == data[0]);
}

TEST_CASE("fvecs: truncated record reports the byte offset") {
    TempFile f("trunc.fvecs");
    {
        std::ofstream out(f.path, std::ios::binary);
        std::int32_t dim = 4;
        float vals[2] = {1, 2};  // missing half the payload
        out.write(reinterpret_cast<char*>(&dim), 4);
        out.write(reinterpret_cast<char*>(vals), 8);
    }
    CHECK_THROWS_WITH_AS(read_fvecs(f.path), doctest::Contains("byte offset"),
                         std::runtime_error);
}

TEST_CASE("fvecs: dimension drift is rejected") {
    TempFile f("drift.fvecs");
    {
        std::ofstream out(f.path, std::ios::binary);
        const auto rec = [&](std::int32_t dim) {
            out.write(reinterpret_cast<char*>(&dim), 4);
            for (int i = 0; i < dim; ++i) {
                float x = 1.0f;
                out.write(reinterpret_cast<char*>(&x), 4);
            }
        };
        rec(3);
        rec(4);
    }
    CHECK_THROWS_WITH_AS(read_fvecs(f.path), doctest::Contains("drift"), std::runtime_error);
}

TEST_CASE("fvecs: 10k-record file matches an independent parser") {
    TempFile f("bulk.fvecs");
    SyntheticSpec spec;
    spec.count = 10000;
    spec.dim = 16;
    spec.seed = 4;
    auto data = gen_synthetic(spec);
    write_fvecs(f.path, data);
    auto ours = read_fvecs(f.path);
    auto theirs = naive_fvecs(f.path);
    REQUIRE(ours.size() == theirs.size());
    REQUIRE(ours.size() == data.size());
    for (std::size_t i = 0; i < ours.size(); ++i) {
        CHECK(ours[i] == theirs[i]);
        CHECK(ours[i] == data[i]);
    }
}

TEST_CASE("ivecs round-trip") {
    TempFile f("gt.ivecs");
    std::vector<std::vector<std::int32_t>> rows{{1, 2, 3}, {7, 8, 9}};
    write_ivecs(f.path, rows);
    CHECK(read_ivecs(f.path) == rows);
}

TEST_CASE("ground truth: a dataset vector is its own nearest neighbor") {
    SyntheticSpec spec;
    spec.count = 200;
    spec.dim = 8;
    spec.seed = 9;
    auto base = gen_synthetic(spec);
    std::vector<FloatVector> queries{base[13], base[77]};
    auto gt = brute_force_groundtruth(base, queries, 5);
    CHECK(gt[0][0] == 13);
    CHECK(gt[1][0] == 77);
}

TEST_CASE("ground truth: K = n yields a distance-sorted permutation") {
    SyntheticSpec spec;
    spec.count = 50;
    spec.dim = 4;
    spec.seed = 10;
    auto base = gen_synthetic(spec);
    std::vector<FloatVector> queries{base[0]};
    auto gt = brute_force_groundtruth(base, queries, 50);
    REQUIRE(gt[0].size() == 50);
    std::vector<bool> present(50, false);
    float prev = -1.0f;
    for (VertexId v : gt[0]) {
        present[v] = true;
        const float d = l2_distance(base[0], base[v]);
        CHECK(d >= prev);
        prev = d;
    }
    CHECK(std::count(present.begin(), present.end(), true) == 50);
}

TEST_CASE("ground truth agrees with a naive quadratic reference on 100x100") {
    SyntheticSpec spec;
    spec.count = 100;
    spec.dim = 6;
    spec.seed = 11;
    auto base = gen_synthetic(spec);
    spec.seed = 12;
    spec.count = 100;
    auto queries = gen_synthetic(spec);
    auto gt = brute_force_groundtruth(base, queries, 10);

    for (std::size_t q = 0; q < queries.size(); ++q) {
        // Independent reference: full sort of (distance, id) pairs.
        std::vector<std::pair<float, VertexId>> scored;
        for (std::size_t i = 0; i < base.size(); ++i) {
            scored.emplace_back(l2_distance(queries[q], base[i]), static_cast<VertexId>(i));
        }
        std::sort(scored.begin(), scored.end());
        for (int k = 0; k < 10; ++k) CHECK(gt[q][k] == scored[k].second);
    }
}

TEST_CASE("recall_at_k") {
    std::vector<VertexId> truth{1, 2, 3, 4};
    std::vector<VertexId> exact{1, 2, 3, 4};
    std::vector<VertexId> half{1, 9, 3, 8};
    CHECK(recall_at_k(exact, truth, 4) == 1.0);
    CHECK(recall_at_k(half, truth, 4) == 0.5);
    CHECK(recall_at_k({}, truth, 4) == 0.0);
}

TEST_CASE("synthetic generation is deterministic and cluster-seed sensitive") {
    SyntheticSpec spec;
    spec.count = 100;
    spec.dim = 8;
    spec.seed = 21;
    spec.cluster_seed = 5;
    auto a = gen_synthetic(spec);
    auto b = gen_synthetic(spec);
    CHECK(a == b);
    spec.cluster_seed = 6;
    auto c = gen_synthetic(spec);
    CHECK(a != c);
}

TEST_CASE("cache-trace policies: repeated single page converges to full hits") {
    std::vector<std::uint64_t> trace(1000, 7);
    for (auto policy : {CachePolicy::kNavis, CachePolicy::kLru, CachePolicy::kLfu,
                        CachePolicy::kClock}) {
        auto report = replay_trace(policy, trace, 8);
        CHECK(report.hits == 999);
    }
}

TEST_CASE("cache-trace: cyclic scan starves LRU while navis keeps frozen survivors") {
    // Classic pathology: cycle over capacity+1 pages.
    std::vector<std::uint64_t> trace;
    const std::size_t capacity = 16;
    for (int rounds = 0; rounds < 200; ++rounds) {
        for (std::uint64_t p = 0; p <= capacity; ++p) trace.push_back(p);
    }
    auto lru = replay_trace(CachePolicy::kLru, trace, capacity);
    CHECK(lru.hits == 0);
    auto navis = replay_trace(CachePolicy::kNavis, trace, capacity);
    CHECK(navis.hits > 0);
}

TEST_CASE("cache-trace: skewed 80/20 favors navis over LRU by a clear margin") {
    const auto trace = gen_skewed_trace(50000, 1000, 40, 0.8, 31);
    auto navis = replay_trace(CachePolicy::kNavis, trace, 50, 3);
    auto lru = replay_trace(CachePolicy::kLru, trace, 50);
    MESSAGE("navis=", navis.hit_rate(), " lru=", lru.hit_rate());
    CHECK(navis.hit_rate() >= lru.hit_rate() + 0.05);
}
