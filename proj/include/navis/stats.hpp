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

namespace navis {

/// Byte accounting for reads follows page content: vector record payloads are
/// useful_vector or wasted_vector (a record is useful only if its vertex ends
/// up in the consumer's exact-selected set; every other record byte on a
/// fetched vector page was read for nothing), edgelist payloads are edgelist,
/// and headers/alignment slack are padding. The four categories always
/// partition pages_read * 4096 exactly.
struct TraversalStats {
    std::uint32_t hops = 0;
    std::uint32_t edge_pages_read = 0;
    std::uint32_t vector_pages_read = 0;
    std::uint32_t vectors_loaded = 0;

    std::uint64_t useful_vector_bytes = 0;
    std::uint64_t wasted_vector_bytes = 0;
    std::uint64_t edgelist_bytes = 0;
    std::uint64_t padding_bytes = 0;

    // Read-path provenance.
    std::uint32_t cache_hits = 0;
    std::uint32_t rmw_hits = 0;
    std::uint32_t disk_reads = 0;

    // Vector payload bytes still awaiting the useful/wasted split; resolved
    // by classify_vectors() once the consumer knows its useful set.
    std::uint64_t unclassified_vector_bytes = 0;

    std::uint64_t total_bytes_read() const {
        return useful_vector_bytes + wasted_vector_bytes + edgelist_bytes + padding_bytes +
               unclassified_vector_bytes;
    }

    void merge(const TraversalStats& o) {
        hops += o.hops;
        edge_pages_read += o.edge_pages_read;
        vector_pages_read += o.vector_pages_read;
        vectors_loaded += o.vectors_loaded;
        useful_vector_bytes += o.useful_vector_bytes;
        wasted_vector_bytes += o.wasted_vector_bytes;
        edgelist_bytes += o.edgelist_bytes;
        padding_bytes += o.padding_bytes;
        cache_hits += o.cache_hits;
        rmw_hits += o.rmw_hits;
        disk_reads += o.disk_reads;
        unclassified_vector_bytes += o.unclassified_vector_bytes;
    }

    // Moves `useful` bytes of the unclassified vector payload into
    // useful_vector and the rest into wasted_vector.
    void classify_vectors(std::uint64_t useful_bytes) {
        if (useful_bytes > unclassified_vector_bytes) useful_bytes = unclassified_vector_bytes;
        useful_vector_bytes += useful_bytes;
        wasted_vector_bytes += unclassified_vector_bytes - useful_bytes;
        unclassified_vector_bytes = 0;
    }
};

struct CommitStats {
    std::uint32_t edge_pages_written = 0;
    std::uint32_t vector_pages_written = 0;
    std::uint32_t slots_invalidated = 0;

    std::uint64_t vector_bytes_written = 0;     // the new record itself
    std::uint64_t rewritten_vector_bytes = 0;   // co-resident vectors rewritten (packed)
    std::uint64_t edgelist_bytes_written = 0;   // live slot payloads
    std::uint64_t padding_bytes_written = 0;    // everything else on written pages

    std::uint64_t total_bytes_written() const {
        return vector_bytes_written + rewritten_vector_bytes + edgelist_bytes_written +
               padding_bytes_written;
    }

    void merge(const CommitStats& o) {
        edge_pages_written += o.edge_pages_written;
        vector_pages_written += o.vector_pages_written;
        slots_invalidated += o.slots_invalidated;
        vector_bytes_written += o.vector_bytes_written;
        rewritten_vector_bytes += o.rewritten_vector_bytes;
        edgelist_bytes_written += o.edgelist_bytes_written;
        padding_bytes_written += o.padding_bytes_written;
    }
};

}  // namespace navis
