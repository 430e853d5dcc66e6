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

#include <cstring>
#include <filesystem>
#include <fstream>

#include "navis/index.hpp"

namespace navis {

namespace {

constexpr char kMetaMagic[4] = {'N', 'V', 'I', 'X'};
constexpr std::uint32_t kMetaVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void get(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void Index::init_components(std::shared_ptr<IoBackend> backend, std::uint64_t capacity) {
    backend_ = std::move(backend);
    cross_ = PqCrossTables(codebook_);
    codes_.reset(codebook_.m, capacity);

    StorageConfig scfg;
    scfg.dim = opts_.graph.dim;
    scfg.max_degree = opts_.graph.max_degree;
    scfg.slots_per_page_override = opts_.slots_per_page_override;
    scfg.verify_checksums = opts_.verify_checksums;
    scfg.capacity = capacity;

    if (opts_.layout == LayoutMode::kDecoupled) {
        cache_ = std::make_unique<NavisCache>(CacheConfig{.capacity_pages = opts_.cache_pages});
        store_ = std::make_unique<DecoupledStorage>(backend_, scfg, cache_.get());
    } else {
        cache_.reset();
        store_ = std::make_unique<PackedStorage>(backend_, scfg);
    }
    entrance_ = std::make_unique<EntranceGraph>(opts_.entrance, &codes_, &cross_);
    casr_.top_k = opts_.top_k;
}

std::vector<std::vector<VertexId>> Index::dump_adjacency() {
    const std::uint64_t n = store_->vertex_count();
    std::vector<std::vector<VertexId>> adjacency(n);
    EdgeLists lists;
    std::vector<VertexId> chunk;
    constexpr std::size_t kChunk = 64;
    for (std::uint64_t base = 0; base < n; base += kChunk) {
        chunk.clear();
        for (std::uint64_t v = base; v < std::min<std::uint64_t>(base + kChunk, n); ++v) {
            chunk.push_back(static_cast<VertexId>(v));
        }
        store_->read_adjacency(chunk, lists, nullptr);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const auto span = lists.list(i);
            adjacency[chunk[i]].assign(span.begin(), span.end());
        }
    }
    return adjacency;
}

std::unique_ptr<Index> Index::build_into(const std::string& dir,
                                         const std::vector<FloatVector>& vectors,
                                         IndexOptions options) {
    std::filesystem::create_directories(dir);
    auto backend = std::make_shared<FileBackend>(dir, /*create=*/true);
    auto index = build(vectors, options, std::move(backend));
    index->save(dir);
    return index;
}

void Index::save(const std::string& dir) {
    std::filesystem::create_directories(dir);
    if (auto* ds = decoupled()) {
        ds->flush();
    } else if (auto* ps = dynamic_cast<PackedStorage*>(store_.get())) {
        ps->flush();
    }

    std::ofstream meta(dir + "/meta", std::ios::binary | std::ios::trunc);
    if (!meta) throw std::runtime_error("save: cannot open meta for write");
    meta.write(kMetaMagic, 4);
    put(meta, kMetaVersion);
    put(meta, opts_.graph.dim);
    put(meta, opts_.graph.max_degree);
    const std::uint64_t vertex_count = store_->vertex_count();
    put(meta, vertex_count);
    const VertexId medoid = medoid_.load(std::memory_order_acquire);
    put(meta, medoid);
    std::uint16_t slot_size = 0, slots_per_page = 0;
    std::uint32_t vector_stride = opts_.graph.dim * 4;
    if (auto* ds = decoupled()) {
        slot_size = ds->edge_layout().slot_size();
        slots_per_page = ds->edge_layout().slots_per_page();
        vector_stride = ds->vector_stride();
    }
    put(meta, slot_size);
    put(meta, slots_per_page);
    put(meta, vector_stride);
    put(meta, backend_->page_count(FileRole::kEdge));
    put(meta, backend_->page_count(FileRole::kVector));

    // Engine parameters (extension block, fixed layout for version 1).
    put(meta, static_cast<std::uint8_t>(opts_.layout));
    put(meta, opts_.graph.beam_width);
    put(meta, opts_.pq_m);
    put(meta, opts_.search_pool_size);
    put(meta, opts_.pos_pool_size);
    put(meta, opts_.top_k);
    put(meta, casr_.s_search);
    put(meta, casr_.s_pos);
    put(meta, static_cast<std::uint8_t>(casr_.calibrated ? 1 : 0));
    put(meta, opts_.entrance.sample_ratio);
    put(meta, opts_.entrance.max_degree);
    put(meta, opts_.entrance.pool_size);
    put(meta, opts_.entrance.entry_count);
    put(meta, opts_.seed);
    put(meta, opts_.capacity);
    put(meta, static_cast<std::uint16_t>(opts_.slots_per_page_override));

    if (auto* ds = decoupled()) {
        ds->save_state(meta);
    } else {
        dynamic_cast<PackedStorage*>(store_.get())->save_state(meta);
    }
    if (!meta) throw std::runtime_error("save: meta write failed");
    meta.close();

    codebook_.save(dir + "/pq_codebook.bin");
    codes_.save(dir + "/pq_codes.bin", vertex_count);
    entrance_->save(dir + "/entrance.bin");
}

std::unique_ptr<Index> Index::open(const std::string& dir, IndexOptions overrides) {
    std::ifstream meta(dir + "/meta", std::ios::binary);
    if (!meta) throw std::runtime_error("open: cannot read " + dir + "/meta");
    char magic[4];
    meta.read(magic, 4);
    std::uint32_t version = 0;
    get(meta, version);
    if (!meta || std::memcmp(magic, kMetaMagic, 4) != 0 || version != kMetaVersion) {
        throw std::runtime_error("open: bad meta header");
    }

    auto index = std::unique_ptr<Index>(new Index());
    IndexOptions& opts = index->opts_;
    std::uint64_t vertex_count = 0, edge_pages = 0, vector_pages = 0;
    VertexId medoid = kInvalidVertex;
    std::uint16_t slot_size = 0, slots_per_page = 0;
    std::uint32_t vector_stride = 0;
    get(meta, opts.graph.dim);
    get(meta, opts.graph.max_degree);
    get(meta, vertex_count);
    get(meta, medoid);
    get(meta, slot_size);
    get(meta, slots_per_page);
    get(meta, vector_stride);
    get(meta, edge_pages);
    get(meta, vector_pages);

    std::uint8_t layout = 0, calibrated = 0;
    std::uint16_t slots_override = 0;
    get(meta, layout);
    get(meta, opts.graph.beam_width);
    get(meta, opts.pq_m);
    get(meta, opts.search_pool_size);
    get(meta, opts.pos_pool_size);
    get(meta, opts.top_k);
    get(meta, index->casr_.s_search);
    get(meta, index->casr_.s_pos);
    get(meta, calibrated);
    get(meta, opts.entrance.sample_ratio);
    get(meta, opts.entrance.max_degree);
    get(meta, opts.entrance.pool_size);
    get(meta, opts.entrance.entry_count);
    get(meta, opts.seed);
    get(meta, opts.capacity);
    get(meta, slots_override);
    if (!meta) throw std::runtime_error("open: truncated meta header");
    opts.layout = static_cast<LayoutMode>(layout);
    opts.slots_per_page_override = slots_override;
    index->casr_.calibrated = calibrated != 0;
    index->medoid_.store(medoid, std::memory_order_release);

    // Runtime knobs come from the caller, not the snapshot.
    opts.cache_pages = overrides.cache_pages;
    opts.verify_checksums = overrides.verify_checksums;
    opts.full_rerank = overrides.full_rerank;
    opts.no_self_prune = overrides.no_self_prune;
    opts.dynamic_entrance = overrides.dynamic_entrance;
    if (overrides.capacity > opts.capacity) opts.capacity = overrides.capacity;

    index->codebook_ = PqCodebook::load(dir + "/pq_codebook.bin");
    auto backend = std::make_shared<FileBackend>(dir, /*create=*/false);
    if (backend->page_count(FileRole::kEdge) != edge_pages) {
        throw std::runtime_error("open: edge file size does not match meta");
    }
    index->init_components(std::move(backend), opts.capacity);
    index->codes_.load(dir + "/pq_codes.bin", opts.pq_m, vertex_count, opts.capacity);

    if (auto* ds = index->decoupled()) {
        ds->load_state(meta, vertex_count);
    } else {
        dynamic_cast<PackedStorage*>(index->store_.get())->load_state(meta, vertex_count);
    }
    if (std::filesystem::exists(dir + "/entrance.bin")) {
        index->entrance_->load(dir + "/entrance.bin");
    }
    index->casr_.top_k = opts.top_k;
    return index;
}

}  // namespace navis
