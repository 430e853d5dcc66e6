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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "navis/core.hpp"

namespace navis {

// fvecs: per record a little-endian i32 dimension followed by dim float32.
// Malformed input reports the failing byte offset.
std::vector<FloatVector> read_fvecs(const std::string& path);
void write_fvecs(const std::string& path, std::span<const FloatVector> vectors);

// ivecs: same shape with i32 payloads.
std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path);
void write_ivecs(const std::string& path, std::span<const std::vector<std::int32_t>> rows);

/// Seeded Gaussian-mixture generator so benchmark runs need no downloads.
/// Cluster centers derive from cluster_seed; two specs sharing cluster_seed
/// draw from the same regions, a different cluster_seed lands elsewhere.
struct SyntheticSpec {
    std::uint64_t count = 0;
    std::uint32_t dim = 0;
    std::uint32_t clusters = 16;
    double center_scale = 10.0;
    double cluster_std = 1.0;
    std::uint64_t seed = 42;
    std::uint64_t cluster_seed = 42;
};
std::vector<FloatVector> gen_synthetic(const SyntheticSpec& spec);

// Exact O(n*q) scan; ties broken toward the lower id.
std::vector<std::vector<VertexId>> brute_force_groundtruth(std::span<const FloatVector> base,
                                                           std::span<const FloatVector> queries,
                                                           std::uint32_t k);

double recall_at_k(std::span<const VertexId> result, std::span<const VertexId> truth,
                   std::uint32_t k);

}  // namespace navis
