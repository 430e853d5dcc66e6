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

#include <cstdio>
#include <random>

#include "navis/pq.hpp"

using namespace navis;

namespace {

std::vector<FloatVector> random_vectors(std::size_t n, std::uint32_t dim, std::uint64_t seed,
                                        float scale = 1.0f) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, scale);
    std::vector<FloatVector> out(n, FloatVector(dim));
    for (auto& v : out) {
        for (auto& x : v) x = g(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("train_pq: 256 distinct vectors with m=1 are exactly representable") {
    auto vectors = random_vectors(256, 4, 11);
    auto cb = train_pq(vectors, 1, 50, 7);
    double err = 0.0;
    for (const auto& v : vectors) {
        auto rec = cb.decode(pq_encode(cb, v));
        err += l2_distance(v, rec);
    }
    CHECK(err == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("train_pq: identical vectors collapse to one code with zero error") {
    std::vector<FloatVector> vectors(300, FloatVector{1.5f, -2.0f, 0.25f, 3.0f});
    auto cb = train_pq(vectors, 2, 10, 3);
    auto code0 = pq_encode(cb, vectors[0]);
    for (const auto& v : vectors) {
        CHECK(pq_encode(cb, v) == code0);
        CHECK(l2_distance(cb.decode(code0), v) == 0.0f);
    }
}

TEST_CASE("train_pq: quantization error is non-increasing over Lloyd iterations") {
    auto vectors = random_vectors(2000, 2, 21);
    PqTrainLog log;
    train_pq(vectors, 1, 25, 5, &log);
    REQUIRE(log.iteration_errors.size() >= 2);
    for (std::size_t i = 1; i < log.iteration_errors.size(); ++i) {
        CHECK(log.iteration_errors[i] <= log.iteration_errors[i - 1] + 1e-9);
    }
}

TEST_CASE("train_pq rejects undersized samples and bad m") {
    auto vectors = random_vectors(100, 4, 2);
    CHECK_THROWS_AS(train_pq(vectors, 1, 5, 1), std::invalid_argument);
    auto enough = random_vectors(300, 4, 2);
    CHECK_THROWS_AS(train_pq(enough, 3, 5, 1), std::invalid_argument);
}

TEST_CASE("encode picks the exact centroid and breaks ties low") {
    // Scalar quantization with enumerated centroids 0,1,...,255.
    PqCodebook cb;
    cb.dim = 1;
    cb.m = 1;
    cb.sub_dim = 1;
    cb.centroids.resize(256);
    for (int c = 0; c < 256; ++c) cb.centroids[c] = static_cast<float>(c);

    CHECK(pq_encode(cb, FloatVector{0.4f})[0] == 0);
    CHECK(pq_encode(cb, FloatVector{0.6f})[0] == 1);
    CHECK(pq_encode(cb, FloatVector{0.5f})[0] == 0);  // tie -> lowest index
    CHECK(pq_encode(cb, FloatVector{7.0f})[0] == 7);
    CHECK_THROWS_AS(pq_encode(cb, FloatVector{1.0f, 2.0f}), std::invalid_argument);
}

TEST_CASE("encode is optimal: no other code reconstructs closer (m=2 brute force)") {
    auto vectors = random_vectors(400, 4, 33);
    auto cb = train_pq(vectors, 2, 10, 9);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const FloatVector& v = vectors[rng() % vectors.size()];
        const auto code = pq_encode(cb, v);
        const float err = l2_distance(v, cb.decode(code));
        // Per-subspace optimality implies global optimality; check each
        // subspace against all 256 alternatives.
        for (std::uint32_t s = 0; s < 2; ++s) {
            for (int c = 0; c < 256; ++c) {
                PqCode alt = code;
                alt[s] = static_cast<std::uint8_t>(c);
                CHECK(err <= l2_distance(v, cb.decode(alt)) + 1e-5f);
            }
        }
    }
}

TEST_CASE("encode is idempotent through decode") {
    auto vectors = random_vectors(500, 8, 17);
    auto cb = train_pq(vectors, 2, 10, 23);
    for (int i = 0; i < 50; ++i) {
        const auto code = pq_encode(cb, vectors[i]);
        CHECK(pq_encode(cb, cb.decode(code)) == code);
    }
}

TEST_CASE("distance table identities") {
    auto vectors = random_vectors(400, 4, 41);
    auto cb = train_pq(vectors, 2, 15, 19);
    std::mt19937_64 rng(5);
    std::normal_distribution<float> g(0, 1);

    SUBCASE("table at a centroid is zero") {
        FloatVector q(cb.dim);
        const float* c0 = cb.centroid(0, 42);
        const float* c1 = cb.centroid(1, 7);
        std::copy(c0, c0 + cb.sub_dim, q.begin());
        std::copy(c1, c1 + cb.sub_dim, q.begin() + cb.sub_dim);
        auto table = build_distance_table(cb, q);
        CHECK(table.at(0, 42) == doctest::Approx(0.0f));
        CHECK(table.at(1, 7) == doctest::Approx(0.0f));
    }

    SUBCASE("pq_distance equals exact distance to the reconstruction") {
        for (int t = 0; t < 30; ++t) {
            FloatVector q(cb.dim);
            for (auto& x : q) x = g(rng);
            auto table = build_distance_table(cb, q);
            const auto code = pq_encode(cb, vectors[t]);
            const float via_table = pq_distance(table, code);
            const float via_decode = l2_distance(q, cb.decode(code));
            CHECK(via_table == doctest::Approx(via_decode).epsilon(1e-4));
        }
    }
}

TEST_CASE("all-zero codebook: table entries equal the query norm") {
    PqCodebook cb;
    cb.dim = 2;
    cb.m = 1;
    cb.sub_dim = 2;
    cb.centroids.assign(256 * 2, 0.0f);
    auto table = build_distance_table(cb, FloatVector{3, 4});
    for (int c = 0; c < 256; ++c) CHECK(table.at(0, static_cast<std::uint8_t>(c)) == 25.0f);
}

TEST_CASE("pq_distance sums the coded entries") {
    DistanceTable t;
    t.m = 2;
    t.values.assign(2 * 256, 0.0f);
    t.values[0 * 256 + 9] = 1.5f;
    t.values[1 * 256 + 4] = 2.5f;
    PqCode code{9, 4};
    CHECK(pq_distance(t, code) == 4.0f);
}

TEST_CASE("identity codebook is lossless for the dataset") {
    auto vectors = random_vectors(100, 6, 55);
    auto cb = identity_codebook(vectors);
    CHECK(cb.m == 1);
    for (int qi = 0; qi < 20; ++qi) {
        auto table = build_distance_table(cb, vectors[qi]);
        for (const auto& v : vectors) {
            const auto code = pq_encode(cb, v);
            CHECK(pq_distance(table, code) == l2_distance(vectors[qi], v));
        }
    }
}

TEST_CASE("identity codebook rejects more than 256 distinct vectors") {
    auto vectors = random_vectors(300, 4, 66);
    CHECK_THROWS_AS(identity_codebook(vectors), std::invalid_argument);
}

TEST_CASE("codebook round-trips through its file format") {
    auto vectors = random_vectors(300, 4, 77);
    auto cb = train_pq(vectors, 2, 8, 3);
    const std::string path = "/tmp/navis_test_codebook.bin";
    cb.save(path);
    auto loaded = PqCodebook::load(path);
    CHECK(loaded.dim == cb.dim);
    CHECK(loaded.m == cb.m);
    CHECK(loaded.centroids == cb.centroids);
    std::remove(path.c_str());
}

TEST_CASE("cross tables agree with decoded distances") {
    auto vectors = random_vectors(300, 4, 88);
    auto cb = train_pq(vectors, 2, 8, 3);
    PqCrossTables cross(cb);
    for (int t = 0; t < 30; ++t) {
        const auto a = pq_encode(cb, vectors[t]);
        const auto b = pq_encode(cb, vectors[t + 100]);
        const float expect = l2_distance(cb.decode(a), cb.decode(b));
        CHECK(cross.code_distance(a.data(), b.data()) == doctest::Approx(expect).epsilon(1e-4));
    }
}
