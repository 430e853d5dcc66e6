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

#include <algorithm>
#include <chrono>
#include <limits>
#include <random>
#include <unordered_set>

#include "navis/index.hpp"

namespace navis {

namespace {

std::uint64_t now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::vector<std::pair<VertexId, std::vector<VertexId>>> Index::wire_neighbors(
    VertexId new_v, const FloatVector& vec, std::span<const VertexId> selected,
    const EdgeLists& current, const RerankResult& rerank, TraversalStats* stats) {
    const std::uint32_t max_degree = opts_.graph.max_degree;
    std::vector<std::pair<VertexId, std::vector<VertexId>>> updates;
    updates.reserve(selected.size());

    // Collect vectors needed for overflow pruning in one batch.
    std::vector<VertexId> need;
    std::unordered_map<VertexId, const FloatVector*> have;
    have.reserve(rerank.kept_vectors.size() + 1);
    for (const auto& [v, kept] : rerank.kept_vectors) have.emplace(v, &kept);
    std::vector<std::size_t> overflow;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto list = current.list(i);
        if (std::find(list.begin(), list.end(), new_v) != list.end()) continue;
        if (list.size() + 1 <= max_degree) continue;
        overflow.push_back(i);
        if (!have.count(selected[i])) need.push_back(selected[i]);
        for (VertexId u : list) {
            if (!have.count(u)) need.push_back(u);
        }
    }
    std::sort(need.begin(), need.end());
    need.erase(std::unique(need.begin(), need.end()), need.end());
    std::vector<FloatVector> fetched;
    if (!need.empty()) {
        TraversalStats prune_stats;
        fetched = store_->read_vectors(need, &prune_stats);
        // These records feed the written lists directly; co-resident records
        // on their pages were read for nothing.
        prune_stats.classify_vectors(static_cast<std::uint64_t>(need.size()) * opts_.graph.dim * 4);
        if (stats) stats->merge(prune_stats);
        for (std::size_t i = 0; i < need.size(); ++i) have.emplace(need[i], &fetched[i]);
    }

    const auto vec_of = [&](VertexId v) -> const FloatVector& {
        return v == new_v ? vec : *have.at(v);
    };

    for (std::size_t i = 0; i < selected.size(); ++i) {
        const VertexId p = selected[i];
        const auto list = current.list(i);
        if (std::find(list.begin(), list.end(), new_v) != list.end()) continue;
        if (list.size() + 1 <= max_degree) {
            std::vector<VertexId> appended(list.begin(), list.end());
            appended.push_back(new_v);
            updates.emplace_back(p, std::move(appended));
            continue;
        }
        // Degree overflow: diversity-prune with exact distances.
        std::vector<ScoredCandidate> cands;
        cands.reserve(list.size() + 1);
        const FloatVector& vp = vec_of(p);
        for (VertexId u : list) cands.push_back({u, l2_distance(vp, vec_of(u))});
        cands.push_back({new_v, l2_distance(vp, vec)});
        auto pruned = alpha_prune(
            std::move(cands),
            [&](VertexId a, VertexId b) { return l2_distance(vec_of(a), vec_of(b)); }, max_degree);

        // Write elision: skip neighbors whose membership did not change.
        std::vector<VertexId> old_sorted(list.begin(), list.end());
        std::vector<VertexId> new_sorted = pruned;
        std::sort(old_sorted.begin(), old_sorted.end());
        std::sort(new_sorted.begin(), new_sorted.end());
        if (old_sorted != new_sorted) updates.emplace_back(p, std::move(pruned));
    }
    std::sort(updates.begin(), updates.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return updates;
}

InsertStats Index::insert(const FloatVector& vector) {
    if (vector.size() != opts_.graph.dim) throw std::invalid_argument("insert: dimension mismatch");
    InsertStats st;
    const std::uint64_t t0 = now_us();

    const VertexId id = store_->allocate_vertex();
    st.id = id;
    // The PQ code publishes before the vertex can become reachable, so any
    // traversal that discovers the id mid-commit can compute its distance.
    codes_.set(id, pq_encode(codebook_, vector));

    if (id == 0) {
        // Bootstrap: first vertex becomes the entry seed (and the medoid,
        // unless the builder picked one already).
        st.commit = store_->commit_insert(id, vector, {}, {});
        VertexId expected = kInvalidVertex;
        medoid_.compare_exchange_strong(expected, 0, std::memory_order_acq_rel);
        return st;
    }

    const DistanceTable table = query_table(vector);
    EntrySelection selection{{}, CandidatePool(1)};
    const std::vector<VertexId> entries = entry_points(table, &selection);

    std::unordered_map<VertexId, FloatVector> piggyback;
    const bool packed = store_->layout() == LayoutMode::kPacked;
    auto [pool, stats] = beam_traverse(table, entries, opts_.pos_pool_size,
                                       opts_.graph.beam_width, packed ? &piggyback : nullptr);
    const std::uint32_t s =
        opts_.full_rerank ? static_cast<std::uint32_t>(std::max<std::size_t>(pool.size(), 1))
                          : casr_.group_for(RerankPath::kPos);
    RerankResult rerank =
        casr_rerank(vector, pool, s, casr_.top_k, &stats, true, packed ? &piggyback : nullptr);
    const std::uint64_t t1 = now_us();

    // Neighbor selection: the exact-ranked close portion first, then
    // PQ-ordered shortcut slots up to R.
    const std::uint32_t max_degree = opts_.graph.max_degree;
    std::vector<std::pair<VertexId, float>> exact_sorted = rerank.exact;
    std::sort(exact_sorted.begin(), exact_sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::vector<VertexId> selected;
    std::unordered_set<VertexId> selected_set;
    selected.reserve(max_degree);
    for (const auto& [v, d] : exact_sorted) {
        if (selected.size() >= max_degree) break;
        selected.push_back(v);
        selected_set.insert(v);
    }
    for (const Candidate& c : pool.entries()) {
        if (selected.size() >= max_degree) break;
        if (selected_set.insert(c.vertex).second) selected.push_back(c.vertex);
    }

    std::vector<VertexId> new_edges;
    if (opts_.no_self_prune || selected.size() <= 1) {
        new_edges = selected;
    } else {
        std::vector<ScoredCandidate> cands;
        cands.reserve(selected.size());
        for (VertexId v : selected) {
            float d;
            if (rerank.has_exact(v)) {
                d = rerank.exact_distance(v);
            } else {
                d = pq_distance(table, codes_.get(v));
            }
            cands.push_back({v, d});
        }
        const auto pair_dist = [&](VertexId a, VertexId b) {
            const auto ia = rerank.kept_vectors.find(a);
            const auto ib = rerank.kept_vectors.find(b);
            if (ia != rerank.kept_vectors.end() && ib != rerank.kept_vectors.end()) {
                return l2_distance(ia->second, ib->second);
            }
            return cross_.code_distance(codes_.get(a), codes_.get(b));
        };
        new_edges = alpha_prune(std::move(cands), pair_dist, max_degree);
    }

    // Structural update under the page locks (global order, verify-and-retry).
    CommitStats commit;
    {
        GraphStore::PageLockGuard guard = store_->lock_vertices(new_edges);
        EdgeLists current;
        store_->read_adjacency(new_edges, current, &stats);
        auto updates = wire_neighbors(id, vector, new_edges, current, rerank, &stats);
        commit = store_->commit_insert(id, vector, new_edges, updates);
        guard.release();
    }
    const std::uint64_t t2 = now_us();

    // Usefulness classifier for position seeking: a loaded vector counts only
    // if its vertex landed in the exact-selected neighbor portion.
    std::uint64_t useful = 0;
    for (const auto& [v, d] : rerank.exact) {
        (void)d;
        if (selected_set.count(v)) useful += opts_.graph.dim * 4ull;
    }
    stats.classify_vectors(useful);

    if (opts_.dynamic_entrance && entrance_ && entrance_->member_count() > 0) {
        st.entrance_inserted =
            entrance_->navis_update(id, pool, selection.pool, store_->vertex_count()) ==
            EntranceGraph::UpdateOutcome::kInserted;
    }
    const std::uint64_t t3 = now_us();

    st.position_seek_us = t1 - t0;
    st.structural_us = t2 - t1;
    st.ent_update_us = t3 - t2;
    st.read_stats = stats;
    st.commit = commit;
    return st;
}

std::unique_ptr<Index> Index::build(const std::vector<FloatVector>& vectors,
                                    const IndexOptions& options,
                                    std::shared_ptr<IoBackend> backend,
                                    const std::function<void(std::uint64_t)>& progress) {
    if (vectors.empty()) throw std::invalid_argument("build: empty input");
    const std::uint32_t dim = static_cast<std::uint32_t>(vectors[0].size());
    for (const FloatVector& v : vectors) {
        if (v.size() != dim) throw std::invalid_argument("build: dimensionality drift");
    }

    auto index = std::unique_ptr<Index>(new Index());
    index->opts_ = options;
    index->opts_.graph.dim = dim;
    index->opts_.graph.validate();
    const std::uint64_t capacity =
        options.capacity ? options.capacity
                         : std::max<std::uint64_t>(1024, vectors.size() * 4);
    index->opts_.capacity = capacity;

    // PQ codebook first; inserted vectors are encoded with it and it is never
    // retrained online.
    if (options.identity_pq) {
        index->codebook_ = identity_codebook(vectors);
    } else {
        std::mt19937_64 rng(options.seed);
        const std::size_t sample_size = std::min<std::size_t>(vectors.size(), 100000);
        std::vector<FloatVector> sample;
        if (sample_size == vectors.size()) {
            sample = vectors;
        } else {
            sample.reserve(sample_size);
            std::vector<std::size_t> ids(vectors.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
            for (std::size_t i = 0; i < sample_size; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
                std::swap(ids[i], ids[pick(rng)]);
                sample.push_back(vectors[ids[i]]);
            }
        }
        index->codebook_ =
            train_pq(sample, options.pq_m, options.pq_train_iters, options.seed);
    }
    index->opts_.pq_m = index->codebook_.m;
    index->init_components(std::move(backend), capacity);

    // Medoid of a seeded 1k sample (candidates drawn from the sample itself).
    {
        std::mt19937_64 rng(options.seed ^ 0x6d656469ull);
        const std::size_t sample_size = std::min<std::size_t>(vectors.size(), 1000);
        std::vector<std::size_t> ids(vectors.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        for (std::size_t i = 0; i < sample_size; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
            std::swap(ids[i], ids[pick(rng)]);
        }
        ids.resize(sample_size);
        std::size_t best = 0;
        double best_sum = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < ids.size(); ++j) {
                sum += l2_distance(vectors[ids[i]], vectors[ids[j]]);
            }
            if (sum < best_sum || (sum == best_sum && ids[i] < ids[best])) {
                best_sum = sum;
                best = i;
            }
        }
        index->medoid_.store(static_cast<VertexId>(ids[best]), std::memory_order_release);
    }

    for (std::size_t i = 0; i < vectors.size(); ++i) {
        index->insert(vectors[i]);
        if (progress) progress(i + 1);
    }

    if (index->opts_.layout == LayoutMode::kDecoupled) {
        const auto adjacency = index->dump_adjacency();
        index->decoupled()->initial_placement(adjacency, index->medoid());
    }
    index->entrance_->build_initial(index->store_->vertex_count(),
                                    index->opts_.entrance.sample_ratio, options.seed);
    return index;
}

}  // namespace navis
