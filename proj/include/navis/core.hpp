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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace navis {

using VertexId = std::uint32_t;

// Reserved sentinel: an id of all-ones marks an invalid/empty slot.
inline constexpr VertexId kInvalidVertex = std::numeric_limits<VertexId>::max();

using FloatVector = std::vector<float>;

struct GraphParams {
    std::uint32_t dim = 0;
    std::uint32_t max_degree = 32;  // R
    std::uint32_t beam_width = 4;   // W

    void validate() const {
        if (dim < 1 || max_degree < 1 || beam_width < 1) {
            throw std::invalid_argument("GraphParams: dim, max_degree and beam_width must be >= 1");
        }
    }
};

struct SearchParams {
    std::uint32_t pool_size = 40;  // |E_search| (or |E_pos| on the insert path)
    std::uint32_t top_k = 10;

    void validate() const {
        if (top_k < 1 || pool_size < top_k) {
            throw std::invalid_argument("SearchParams: need pool_size >= top_k >= 1");
        }
    }
};

// Squared L2 with index-order accumulation so results are bit-reproducible.
inline float l2_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("l2_distance: length mismatch");
    }
    float sum = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

struct Candidate {
    VertexId vertex = kInvalidVertex;
    float pq_dist = 0.0f;
    bool visited = false;
};

// Orders by (pq_dist, vertex); the fixed tie-break keeps traversal deterministic.
inline bool candidate_less(const Candidate& a, const Candidate& b) {
    if (a.pq_dist != b.pq_dist) return a.pq_dist < b.pq_dist;
    return a.vertex < b.vertex;
}

/// Bounded explored set, kept sorted ascending by PQ distance.
/// Used for E_search, E_pos and the entrance-graph pool. Confined to one
/// query worker; never shared mutably.
class CandidatePool {
public:
    explicit CandidatePool(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("CandidatePool: capacity must be >= 1");
        entries_.reserve(capacity_ + 1);
    }

    // Inserts in sorted position; drops the farthest entry on overflow.
    // Returns whether the candidate was retained. Duplicate ids are rejected.
    bool insert(const Candidate& c) {
        for (const Candidate& e : entries_) {
            if (e.vertex == c.vertex) return false;
        }
        auto pos = std::lower_bound(entries_.begin(), entries_.end(), c, candidate_less);
        if (entries_.size() >= capacity_ && pos == entries_.end()) {
            return false;
        }
        entries_.insert(pos, c);
        if (entries_.size() > capacity_) {
            entries_.pop_back();
        }
        return true;
    }

    // Index of the closest unvisited entry, or npos if all are visited.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t closest_unvisited() const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!entries_[i].visited) return i;
        }
        return npos;
    }

    void mark_visited(std::size_t idx) { entries_.at(idx).visited = true; }

    bool all_visited() const {
        for (const Candidate& e : entries_) {
            if (!e.visited) return false;
        }
        return true;
    }

    bool contains(VertexId v) const {
        for (const Candidate& e : entries_) {
            if (e.vertex == v) return true;
        }
        return false;
    }

    const std::vector<Candidate>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return entries_.empty(); }

private:
    std::size_t capacity_;
    std::vector<Candidate> entries_;
};

}  // namespace navis
