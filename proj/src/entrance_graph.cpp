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

#include "navis/entrance_graph.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <random>

namespace navis {

namespace {
thread_local int tl_guard_depth = 0;

struct GuardScope {
    GuardScope() { ++tl_guard_depth; }
    ~GuardScope() { --tl_guard_depth; }
};
}  // namespace

bool EntranceGraph::in_critical_section() { return tl_guard_depth > 0; }

std::vector<VertexId> alpha_prune(std::vector<ScoredCandidate> candidates,
                                  const std::function<float(VertexId, VertexId)>& pair_dist,
                                  std::size_t cap, float alpha) {
    std::sort(candidates.begin(), candidates.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.id < b.id;
    });
    candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                 [](const ScoredCandidate& a, const ScoredCandidate& b) {
                                     return a.id == b.id;
                                 }),
                     candidates.end());

    std::vector<VertexId> kept;
    for (const ScoredCandidate& c : candidates) {
        if (kept.size() >= cap) break;
        bool dominated = false;
        for (VertexId k : kept) {
            if (pair_dist(k, c.id) * alpha <= c.dist) {
                dominated = true;
                break;
            }
        }
        if (!dominated) kept.push_back(c.id);
    }
    return kept;
}

EntranceGraph::EntranceGraph(const EntranceParams& params, const PqCodeStore* codes,
                             const PqCrossTables* cross)
    : params_(params), codes_(codes), cross_(cross) {
    params_.validate();
}

float EntranceGraph::code_dist(VertexId a, VertexId b) const {
    if (in_critical_section()) {
        throw std::logic_error("entrance graph: distance computation inside the critical section");
    }
    return cross_->code_distance(codes_->get(a), codes_->get(b));
}

float EntranceGraph::table_dist(const DistanceTable& table, VertexId v) const {
    if (in_critical_section()) {
        throw std::logic_error("entrance graph: distance computation inside the critical section");
    }
    return pq_distance(table, codes_->get(v));
}

CandidatePool EntranceGraph::search_members(const std::function<float(VertexId)>& dist_to_q,
                                            std::size_t pool_size) const {
    // Caller holds (at least) the shared structure lock.
    CandidatePool pool(pool_size);
    if (adjacency_.empty()) return pool;
    pool.insert({entry_seed_, dist_to_q(entry_seed_), false});
    while (true) {
        const std::size_t idx = pool.closest_unvisited();
        if (idx == CandidatePool::npos) break;
        const VertexId v = pool.entries()[idx].vertex;
        pool.mark_visited(idx);
        auto it = adjacency_.find(v);
        if (it == adjacency_.end()) continue;
        const auto list = it->second;
        for (VertexId u : *list) {
            if (!pool.contains(u)) pool.insert({u, dist_to_q(u), false});
        }
    }
    return pool;
}

void EntranceGraph::build_initial(std::uint64_t graph_size, double sample_ratio,
                                  std::uint64_t seed) {
    if (graph_size == 0) throw std::invalid_argument("build_initial: empty graph");
    std::unique_lock lock(mutex_);
    adjacency_.clear();
    member_count_.store(0, std::memory_order_release);

    std::size_t count = static_cast<std::size_t>(sample_ratio * static_cast<double>(graph_size) + 0.5);
    count = std::min<std::size_t>(std::max<std::size_t>(count, 1), graph_size);

    // Partial Fisher-Yates over the id range, seeded.
    std::mt19937_64 rng(seed);
    std::vector<VertexId> ids(graph_size);
    for (std::uint64_t i = 0; i < graph_size; ++i) ids[i] = static_cast<VertexId>(i);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(count);

    entry_seed_ = ids[0];
    adjacency_[ids[0]] = std::make_shared<const std::vector<VertexId>>();
    member_count_.store(1, std::memory_order_release);

    for (std::size_t i = 1; i < ids.size(); ++i) {
        const VertexId q = ids[i];
        const CandidatePool pool =
            search_members([&](VertexId v) { return code_dist(q, v); }, params_.pool_size);
        insert_member_locked_free(q, pool);
    }
}

void EntranceGraph::insert_member_locked_free(VertexId q, const CandidatePool& pool) {
    // Build-time wiring; the unique lock is already held and there are no
    // concurrent readers, so distance work inline is fine here.
    std::vector<ScoredCandidate> candidates;
    candidates.reserve(pool.size());
    for (const Candidate& c : pool.entries()) candidates.push_back({c.vertex, c.pq_dist});
    const auto pair_dist = [&](VertexId a, VertexId b) { return code_dist(a, b); };
    std::vector<VertexId> neighbors = alpha_prune(std::move(candidates), pair_dist, params_.max_degree);

    adjacency_[q] = std::make_shared<const std::vector<VertexId>>(neighbors);
    member_count_.fetch_add(1, std::memory_order_acq_rel);

    for (VertexId p : neighbors) {
        const auto current = adjacency_.at(p);
        std::vector<ScoredCandidate> recip;
        recip.reserve(current->size() + 1);
        for (VertexId x : *current) recip.push_back({x, code_dist(p, x)});
        recip.push_back({q, code_dist(p, q)});
        auto pruned = alpha_prune(std::move(recip), pair_dist, params_.max_degree);
        adjacency_[p] = std::make_shared<const std::vector<VertexId>>(std::move(pruned));
    }
}

EntrySelection EntranceGraph::select_entry_points(const DistanceTable& table) const {
    std::shared_lock lock(mutex_);
    if (adjacency_.empty()) {
        throw std::logic_error("select_entry_points: entrance graph is empty");
    }
    CandidatePool pool =
        search_members([&](VertexId v) { return table_dist(table, v); }, params_.pool_size);
    std::vector<VertexId> entries;
    const std::size_t n = std::min<std::size_t>(params_.entry_count, pool.size());
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) entries.push_back(pool.entries()[i].vertex);
    return {std::move(entries), std::move(pool)};
}

EntranceGraph::UpdateOutcome EntranceGraph::navis_update(VertexId q, const CandidatePool& e_pos,
                                                         const CandidatePool& e_ent,
                                                         std::uint64_t graph_size) {
    if (graph_size == 0) return UpdateOutcome::kSkipped;
    const double ratio =
        static_cast<double>(member_count_.load(std::memory_order_acquire)) / graph_size;
    if (ratio >= params_.sample_ratio) return UpdateOutcome::kSkipped;

    const std::size_t cap = params_.max_degree;

    // Candidate selection and all distance work happen before the guard.
    std::vector<VertexId> inter;
    {
        std::shared_lock lock(mutex_);
        for (const Candidate& c : e_pos.entries()) {
            if (adjacency_.count(c.vertex)) inter.push_back(c.vertex);
            if (inter.size() >= cap) break;
        }
    }
    std::vector<VertexId> neighbors = inter;
    if (neighbors.size() < cap) {
        std::shared_lock lock(mutex_);
        for (const Candidate& c : e_ent.entries()) {
            if (neighbors.size() >= cap) break;
            if (c.vertex == q) continue;
            if (!adjacency_.count(c.vertex)) continue;
            if (std::find(neighbors.begin(), neighbors.end(), c.vertex) == neighbors.end()) {
                neighbors.push_back(c.vertex);
            }
        }
    }
    if (neighbors.empty()) return UpdateOutcome::kSkipped;

    // Reciprocal lists, pruned outside the lock. Remember which snapshot each
    // list was derived from so a concurrent update is never clobbered.
    struct Reciprocal {
        VertexId p;
        std::shared_ptr<const std::vector<VertexId>> based_on;
        std::shared_ptr<const std::vector<VertexId>> pruned;
    };
    const auto pair_dist = [&](VertexId a, VertexId b) { return code_dist(a, b); };
    std::vector<Reciprocal> reciprocal;
    reciprocal.reserve(neighbors.size());
    for (VertexId p : neighbors) {
        std::shared_ptr<const std::vector<VertexId>> current;
        {
            std::shared_lock lock(mutex_);
            auto it = adjacency_.find(p);
            if (it == adjacency_.end()) continue;
            current = it->second;
        }
        std::vector<ScoredCandidate> cands;
        cands.reserve(current->size() + 1);
        for (VertexId x : *current) cands.push_back({x, code_dist(p, x)});
        cands.push_back({q, code_dist(p, q)});
        auto pruned = std::make_shared<const std::vector<VertexId>>(
            alpha_prune(std::move(cands), pair_dist, cap));
        reciprocal.push_back({p, std::move(current), std::move(pruned)});
    }

    std::unique_lock lock(mutex_);
    GuardScope guard_scope;
    // Recheck under the guard so at most one racer wins per unit of headroom.
    const double locked_ratio =
        static_cast<double>(member_count_.load(std::memory_order_acquire)) / graph_size;
    if (locked_ratio >= params_.sample_ratio) return UpdateOutcome::kSkipped;
    if (adjacency_.count(q)) return UpdateOutcome::kSkipped;

    adjacency_[q] = std::make_shared<const std::vector<VertexId>>(neighbors);
    for (Reciprocal& r : reciprocal) {
        auto it = adjacency_.find(r.p);
        if (it == adjacency_.end()) continue;
        if (it->second == r.based_on) {
            it->second = r.pruned;
        } else if (it->second->size() < cap) {
            // The list moved under us; append without re-pruning (no distance
            // work is allowed here) rather than clobber the newer list.
            auto appended = std::make_shared<std::vector<VertexId>>(*it->second);
            if (std::find(appended->begin(), appended->end(), q) == appended->end()) {
                appended->push_back(q);
            }
            it->second = std::move(appended);
        }
    }
    member_count_.fetch_add(1, std::memory_order_acq_rel);
    return UpdateOutcome::kInserted;
}

bool EntranceGraph::contains(VertexId v) const {
    std::shared_lock lock(mutex_);
    return adjacency_.count(v) > 0;
}

std::shared_ptr<const std::vector<VertexId>> EntranceGraph::adjacency_of(VertexId v) const {
    std::shared_lock lock(mutex_);
    auto it = adjacency_.find(v);
    return it == adjacency_.end() ? nullptr : it->second;
}

std::vector<VertexId> EntranceGraph::members_snapshot() const {
    std::shared_lock lock(mutex_);
    std::vector<VertexId> out;
    out.reserve(adjacency_.size());
    for (const auto& [v, _] : adjacency_) out.push_back(v);
    std::sort(out.begin(), out.end());
    return out;
}

void EntranceGraph::save(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("EntranceGraph: cannot open for write: " + path);
    const std::uint64_t count = adjacency_.size();
    const std::uint32_t r_ent = params_.max_degree;
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(&r_ent), 4);
    out.write(reinterpret_cast<const char*>(&entry_seed_), 4);
    std::vector<VertexId> order;
    order.reserve(count);
    for (const auto& [v, _] : adjacency_) order.push_back(v);
    std::sort(order.begin(), order.end());
    for (VertexId v : order) {
        const auto& list = *adjacency_.at(v);
        const std::uint32_t degree = static_cast<std::uint32_t>(list.size());
        out.write(reinterpret_cast<const char*>(&v), 4);
        out.write(reinterpret_cast<const char*>(&degree), 4);
        out.write(reinterpret_cast<const char*>(list.data()), 4ll * degree);
    }
    if (!out) throw std::runtime_error("EntranceGraph: write failed: " + path);
}

void EntranceGraph::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("EntranceGraph: cannot open: " + path);
    std::unique_lock lock(mutex_);
    adjacency_.clear();
    std::uint64_t count = 0;
    std::uint32_t r_ent = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    in.read(reinterpret_cast<char*>(&r_ent), 4);
    in.read(reinterpret_cast<char*>(&entry_seed_), 4);
    if (!in || r_ent != params_.max_degree) {
        throw std::runtime_error("EntranceGraph: bad header in " + path);
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        VertexId v = kInvalidVertex;
        std::uint32_t degree = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        in.read(reinterpret_cast<char*>(&degree), 4);
        auto list = std::make_shared<std::vector<VertexId>>(degree);
        in.read(reinterpret_cast<char*>(list->data()), 4ll * degree);
        if (!in) throw std::runtime_error("EntranceGraph: truncated file: " + path);
        adjacency_[v] = std::move(list);
    }
    member_count_.store(adjacency_.size(), std::memory_order_release);
}

}  // namespace navis
