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

#include "navis/search_engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "navis/index.hpp"

namespace navis {

std::uint32_t nearest_rank_percentile(std::vector<std::uint32_t> counts, double q) {
    if (counts.empty()) throw std::invalid_argument("nearest_rank_percentile: empty input");
    std::sort(counts.begin(), counts.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(counts.size())));
    return counts[std::max<std::size_t>(rank, 1) - 1];
}

std::uint32_t calibrate_group_size_from_counts(const std::vector<std::uint32_t>& counts,
                                               std::uint32_t pool_size) {
    const std::uint32_t p25 = nearest_rank_percentile(counts, 0.25);
    return std::clamp<std::uint32_t>(p25, 1, pool_size);
}

std::uint32_t calibrate_group_size(
    std::size_t query_count, std::uint32_t pool_size,
    const std::function<std::uint32_t(std::size_t)>& convergence_count) {
    if (query_count < 1) throw std::invalid_argument("calibrate_group_size: need >= 1 query");
    std::vector<std::uint32_t> counts;
    counts.reserve(query_count);
    for (std::size_t i = 0; i < query_count; ++i) counts.push_back(convergence_count(i));
    return calibrate_group_size_from_counts(counts, pool_size);
}

// ---------------------------------------------------------------------------
// Index query pipeline

std::vector<VertexId> Index::entry_points(const DistanceTable& table, EntrySelection* selection) {
    if (entrance_ && entrance_->member_count() > 0) {
        EntrySelection sel = entrance_->select_entry_points(table);
        std::vector<VertexId> entries = sel.entries;
        if (selection) *selection = std::move(sel);
        return entries;
    }
    VertexId m = medoid_.load(std::memory_order_acquire);
    if (m == kInvalidVertex || !store_->live(m)) {
        // The chosen medoid may not have been inserted yet mid-build.
        m = 0;
        if (!store_->live(m)) throw std::runtime_error("entry_points: index is empty");
    }
    if (selection) *selection = EntrySelection{{m}, CandidatePool(1)};
    return {m};
}

std::pair<CandidatePool, TraversalStats> Index::beam_traverse(
    const DistanceTable& table, std::span<const VertexId> entries, std::uint32_t pool_size,
    std::uint32_t beam_width, std::unordered_map<VertexId, FloatVector>* piggyback) {
    TraversalStats stats;
    CandidatePool pool(pool_size);
    std::unordered_set<VertexId> seen;
    seen.reserve(pool_size * 8);

    for (VertexId e : entries) {
        if (!store_->live(e)) {
            throw std::invalid_argument("beam_traverse: entry not live: " + std::to_string(e));
        }
        if (seen.insert(e).second) {
            pool.insert({e, pq_distance(table, codes_.get(e)), false});
        }
    }

    EdgeLists lists;
    std::vector<VertexId> round;
    round.reserve(beam_width);
    while (true) {
        round.clear();
        std::vector<std::size_t> round_idx;
        for (std::size_t i = 0; i < pool.entries().size() && round.size() < beam_width; ++i) {
            if (!pool.entries()[i].visited) {
                round.push_back(pool.entries()[i].vertex);
                round_idx.push_back(i);
            }
        }
        if (round.empty()) break;
        stats.hops++;
        // One I/O batch per round, via the RMW -> cache -> disk read path.
        store_->read_adjacency(round, lists, &stats);
        for (std::size_t i : round_idx) pool.mark_visited(i);
        for (std::size_t r = 0; r < round.size(); ++r) {
            if (piggyback && lists.vectors[r] != nullptr) {
                piggyback->emplace(round[r],
                                   FloatVector(lists.vectors[r], lists.vectors[r] + opts_.graph.dim));
            }
            for (VertexId u : lists.list(r)) {
                if (u == kInvalidVertex || !seen.insert(u).second) continue;
                pool.insert({u, pq_distance(table, codes_.get(u)), false});
            }
        }
    }
    return {std::move(pool), stats};
}

namespace {

std::vector<VertexId> top_k_of(const std::vector<std::pair<VertexId, float>>& exact,
                               std::uint32_t k) {
    std::vector<std::pair<VertexId, float>> sorted = exact;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::vector<VertexId> top;
    top.reserve(std::min<std::size_t>(k, sorted.size()));
    for (std::size_t i = 0; i < sorted.size() && i < k; ++i) top.push_back(sorted[i].first);
    return top;
}

}  // namespace

RerankResult Index::casr_rerank(const FloatVector& query, const CandidatePool& pool,
                                std::uint32_t group_size, std::uint32_t top_k,
                                TraversalStats* stats, bool keep_vectors,
                                const std::unordered_map<VertexId, FloatVector>* piggyback) {
    RerankResult rr;
    const std::size_t n = pool.size();
    if (n == 0) return rr;

    std::vector<VertexId> ids;
    ids.reserve(n);
    for (const Candidate& c : pool.entries()) ids.push_back(c.vertex);
    const std::uint32_t s = std::clamp<std::uint32_t>(group_size, 1, static_cast<std::uint32_t>(n));

    const auto consume = [&](std::span<const VertexId> group_ids,
                             std::vector<FloatVector>&& vectors) {
        for (std::size_t i = 0; i < group_ids.size(); ++i) {
            const float d = l2_distance(query, vectors[i]);
            rr.exact.emplace_back(group_ids[i], d);
            if (keep_vectors) rr.kept_vectors.emplace(group_ids[i], std::move(vectors[i]));
        }
        rr.groups_consumed++;
    };

    std::vector<VertexId> top;  // T, initially empty: the first test always fails
    if (piggyback == nullptr) {
        DecoupledStorage* ds = decoupled();
        if (ds == nullptr) {
            throw std::logic_error("casr_rerank: vector loads require the decoupled layout");
        }
        std::size_t idx = std::min<std::size_t>(s, n);
        auto pending = ds->begin_read_vectors(std::span<const VertexId>(ids.data(), idx));
        rr.vectors_loaded += static_cast<std::uint32_t>(idx);
        while (pending.active) {
            auto current = std::move(pending);
            pending = DecoupledStorage::PendingVectorRead{};
            std::vector<VertexId> current_ids = current.ids;
            std::vector<FloatVector> vectors = ds->finish_read_vectors(current, stats);
            if (idx < n) {
                // Speculative next group: submitted before this group's
                // exact distances are computed.
                const std::size_t next = std::min<std::size_t>(s, n - idx);
                pending = ds->begin_read_vectors(std::span<const VertexId>(ids.data() + idx, next));
                rr.vectors_loaded += static_cast<std::uint32_t>(next);
                idx += next;
            }
            consume(current_ids, std::move(vectors));
            std::vector<VertexId> top_new = top_k_of(rr.exact, top_k);
            if (top_new == top) {
                // Converged; at most one speculative group overshoots, and its
                // bytes land in the wasted-vector category.
                if (pending.active) ds->finish_read_vectors(pending, stats);
                break;
            }
            top = std::move(top_new);
        }
    } else {
        // Vectors already in memory (packed piggybacking): same control flow,
        // no storage I/O.
        std::size_t idx = 0;
        while (idx < n) {
            const std::size_t take = std::min<std::size_t>(s, n - idx);
            std::span<const VertexId> group(ids.data() + idx, take);
            std::vector<FloatVector> vectors;
            vectors.reserve(take);
            for (VertexId v : group) vectors.push_back(piggyback->at(v));
            idx += take;
            rr.vectors_loaded += static_cast<std::uint32_t>(take);
            consume(group, std::move(vectors));
            std::vector<VertexId> top_new = top_k_of(rr.exact, top_k);
            if (top_new == top) break;
            top = std::move(top_new);
        }
    }
    rr.top = std::move(top);
    return rr;
}

SearchResult Index::search(const FloatVector& query, const SearchParams& params) {
    params.validate();
    if (query.size() != opts_.graph.dim) throw std::invalid_argument("search: dimension mismatch");
    if (store_->vertex_count() == 0) throw std::runtime_error("search: index is empty");

    const DistanceTable table = query_table(query);
    const std::vector<VertexId> entries = entry_points(table, nullptr);

    std::unordered_map<VertexId, FloatVector> piggyback;
    const bool packed = store_->layout() == LayoutMode::kPacked;
    auto [pool, stats] = beam_traverse(table, entries, params.pool_size, opts_.graph.beam_width,
                                       packed ? &piggyback : nullptr);

    const std::uint32_t s =
        opts_.full_rerank ? static_cast<std::uint32_t>(std::max<std::size_t>(pool.size(), 1))
                          : casr_.group_for(RerankPath::kSearch);
    RerankResult rr = casr_rerank(query, pool, s, params.top_k, &stats, false,
                                  packed ? &piggyback : nullptr);

    // A loaded vector is useful only if its vertex made the final top-K.
    stats.classify_vectors(static_cast<std::uint64_t>(rr.top.size()) * opts_.graph.dim * 4);

    SearchResult result;
    result.groups_consumed = rr.groups_consumed;
    result.top.reserve(rr.top.size());
    for (VertexId v : rr.top) result.top.emplace_back(v, rr.exact_distance(v));
    result.stats = stats;
    return result;
}

std::uint32_t Index::convergence_count(const FloatVector& query, RerankPath path) {
    const DistanceTable table = query_table(query);
    const std::vector<VertexId> entries = entry_points(table, nullptr);
    const std::uint32_t pool_size =
        path == RerankPath::kSearch ? opts_.search_pool_size : opts_.pos_pool_size;

    std::unordered_map<VertexId, FloatVector> piggyback;
    const bool packed = store_->layout() == LayoutMode::kPacked;
    auto [pool, stats] = beam_traverse(table, entries, pool_size, opts_.graph.beam_width,
                                       packed ? &piggyback : nullptr);
    RerankResult rr = casr_rerank(query, pool, 1, casr_.top_k, &stats, false,
                                  packed ? &piggyback : nullptr);
    return static_cast<std::uint32_t>(rr.exact.size());
}

void Index::calibrate(std::span<const FloatVector> queries) {
    if (queries.empty()) throw std::invalid_argument("calibrate: need at least one query");
    casr_.s_search = calibrate_group_size(queries.size(), opts_.search_pool_size, [&](std::size_t i) {
        return convergence_count(queries[i], RerankPath::kSearch);
    });
    casr_.s_pos = calibrate_group_size(queries.size(), opts_.pos_pool_size, [&](std::size_t i) {
        return convergence_count(queries[i], RerankPath::kPos);
    });
    casr_.calibrated = true;
}

}  // namespace navis
