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

namespace navis {

enum class CachePolicy { kNavis, kLru, kLfu, kClock };

CachePolicy cache_policy_from_string(const std::string& name);
std::string to_string(CachePolicy policy);

struct TraceReport {
    std::uint64_t accesses = 0;
    std::uint64_t hits = 0;
    std::uint64_t frozen_evictions = 0;  // navis only
    double hit_rate() const { return accesses ? static_cast<double>(hits) / accesses : 0.0; }
};

// Replays a page-access trace through the chosen policy at fixed capacity.
// Reference policies are minimal implementations for comparison only.
TraceReport replay_trace(CachePolicy policy, std::span<const std::uint64_t> trace,
                         std::size_t capacity, std::uint64_t seed = 1);

// Seeded skewed trace: `hot_fraction` of accesses target a fixed hot set of
// `hot_pages` pages; the rest scatter over `total_pages`.
std::vector<std::uint64_t> gen_skewed_trace(std::size_t length, std::uint64_t total_pages,
                                            std::uint64_t hot_pages, double hot_fraction,
                                            std::uint64_t seed);

}  // namespace navis
