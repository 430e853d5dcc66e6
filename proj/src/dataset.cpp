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

#include "navis/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace navis {

namespace {

[[noreturn]] void malformed(const std::string& path, std::uint64_t offset, const char* what) {
    throw std::runtime_error(path + ": " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace

std::vector<FloatVector> read_fvecs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_fvecs: cannot open " + path);
    std::vector<FloatVector> out;
    std::uint64_t offset = 0;
    std::int32_t dim0 = -1;
    while (true) {
        std::int32_t dim = 0;
        in.read(reinterpret_cast<char*>(&dim), 4);
        if (in.gcount() == 0 && in.eof()) break;
        if (in.gcount() != 4) malformed(path, offset, "truncated record header");
        if (dim <= 0) malformed(path, offset, "non-positive dimension");
        if (dim0 < 0) {
            dim0 = dim;
        } else if (dim != dim0) {
            malformed(path, offset, "dimension drift");
        }
        FloatVector v(dim);
        in.read(reinterpret_cast<char*>(v.data()), 4ll * dim);
        if (in.gcount() != 4ll * dim) malformed(path, offset + 4, "truncated record payload");
        for (float x : v) {
            if (!std::isfinite(x)) malformed(path, offset + 4, "non-finite value");
        }
        out.push_back(std::move(v));
        offset += 4 + 4ull * dim;
    }
    return out;
}

void write_fvecs(const std::string& path, std::span<const FloatVector> vectors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_fvecs: cannot open " + path);
    for (const FloatVector& v : vectors) {
        const std::int32_t dim = static_cast<std::int32_t>(v.size());
        out.write(reinterpret_cast<const char*>(&dim), 4);
        out.write(reinterpret_cast<const char*>(v.data()), 4ll * dim);
    }
    if (!out) throw std::runtime_error("write_fvecs: write failed: " + path);
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ivecs: cannot open " + path);
    std::vector<std::vector<std::int32_t>> out;
    std::uint64_t offset = 0;
    while (true) {
        std::int32_t k = 0;
        in.read(reinterpret_cast<char*>(&k), 4);
        if (in.gcount() == 0 && in.eof()) break;
        if (in.gcount() != 4) malformed(path, offset, "truncated record header");
        if (k < 0) malformed(path, offset, "negative row length");
        std::vector<std::int32_t> row(k);
        in.read(reinterpret_cast<char*>(row.data()), 4ll * k);
        if (in.gcount() != 4ll * k) malformed(path, offset + 4, "truncated record payload");
        out.push_back(std::move(row));
        offset += 4 + 4ull * k;
    }
    return out;
}

void write_ivecs(const std::string& path, std::span<const std::vector<std::int32_t>> rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_ivecs: cannot open " + path);
    for (const auto& row : rows) {
        const std::int32_t k = static_cast<std::int32_t>(row.size());
        out.write(reinterpret_cast<const char*>(&k), 4);
        out.write(reinterpret_cast<const char*>(row.data()), 4ll * k);
    }
    if (!out) throw std::runtime_error("write_ivecs: write failed: " + path);
}

std::vector<FloatVector> gen_synthetic(const SyntheticSpec& spec) {
    if (spec.count == 0 || spec.dim == 0 || spec.clusters == 0) {
        throw std::invalid_argument("gen_synthetic: count, dim and clusters must be positive");
    }
    std::mt19937_64 center_rng(spec.cluster_seed);
    std::normal_distribution<double> center_dist(0.0, spec.center_scale);
    std::vector<FloatVector> centers(spec.clusters, FloatVector(spec.dim));
    for (auto& c : centers) {
        for (float& x : c) x = static_cast<float>(center_dist(center_rng));
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.cluster_std);
    std::uniform_int_distribution<std::uint32_t> pick(0, spec.clusters - 1);
    std::vector<FloatVector> out(spec.count, FloatVector(spec.dim));
    for (auto& v : out) {
        const FloatVector& c = centers[pick(rng)];
        for (std::uint32_t d = 0; d < spec.dim; ++d) {
            v[d] = c[d] + static_cast<float>(noise(rng));
        }
    }
    return out;
}

std::vector<std::vector<VertexId>> brute_force_groundtruth(std::span<const FloatVector> base,
                                                           std::span<const FloatVector> queries,
                                                           std::uint32_t k) {
    std::vector<std::vector<VertexId>> out(queries.size());
    std::vector<std::pair<float, VertexId>> scored(base.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t i = 0; i < base.size(); ++i) {
            scored[i] = {l2_distance(queries[q], base[i]), static_cast<VertexId>(i)};
        }
        const std::size_t take = std::min<std::size_t>(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + take, scored.end());
        out[q].reserve(take);
        for (std::size_t i = 0; i < take; ++i) out[q].push_back(scored[i].second);
    }
    return out;
}

double recall_at_k(std::span<const VertexId> result, std::span<const VertexId> truth,
                   std::uint32_t k) {
    if (k == 0) return 0.0;
    std::size_t hit = 0;
    const std::size_t limit = std::min<std::size_t>(k, truth.size());
    for (std::size_t i = 0; i < limit; ++i) {
        const VertexId t = truth[i];
        for (std::size_t j = 0; j < result.size() && j < k; ++j) {
            if (result[j] == t) {
                ++hit;
                break;
            }
        }
    }
    return limit == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(limit);
}

}  // namespace navis
