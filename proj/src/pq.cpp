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

#include "navis/pq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace navis {

namespace {

constexpr char kCodebookMagic[4] = {'N', 'V', 'P', 'Q'};
constexpr std::uint32_t kCodebookVersion = 1;

inline float sub_l2(const float* a, const float* b, std::uint32_t d) {
    float sum = 0.0f;
    for (std::uint32_t i = 0; i < d; ++i) {
        const float diff = a[i] - b[i];
        sum += diff * diff;
    }
    return sum;
}

// Nearest centroid in one subspace; ties go to the lowest index.
inline std::uint32_t nearest_centroid(const float* sub, const float* table, std::uint32_t k,
                                      std::uint32_t sub_dim, float* best_out = nullptr) {
    std::uint32_t best = 0;
    float best_d = sub_l2(sub, table, sub_dim);
    for (std::uint32_t c = 1; c < k; ++c) {
        const float d = sub_l2(sub, table + static_cast<std::size_t>(c) * sub_dim, sub_dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_out) *best_out = best_d;
    return best;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

FloatVector PqCodebook::decode(const PqCode& code) const {
    FloatVector out(dim);
    for (std::uint32_t s = 0; s < m; ++s) {
        const float* c = centroid(s, code[s]);
        std::copy(c, c + sub_dim, out.begin() + static_cast<std::size_t>(s) * sub_dim);
    }
    return out;
}

void PqCodebook::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("PqCodebook: cannot open for write: " + path);
    out.write(kCodebookMagic, 4);
    write_pod(out, kCodebookVersion);
    write_pod(out, dim);
    write_pod(out, m);
    const std::uint32_t k = kCentroids;
    write_pod(out, k);
    out.write(reinterpret_cast<const char*>(centroids.data()),
              static_cast<std::streamsize>(centroids.size() * sizeof(float)));
    if (!out) throw std::runtime_error("PqCodebook: write failed: " + path);
}

PqCodebook PqCodebook::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("PqCodebook: cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCodebookMagic, 4) != 0) {
        throw std::runtime_error("PqCodebook: bad magic in " + path);
    }
    std::uint32_t version = 0, k = 0;
    PqCodebook cb;
    read_pod(in, version);
    read_pod(in, cb.dim);
    read_pod(in, cb.m);
    read_pod(in, k);
    if (version != kCodebookVersion || k != kCentroids || cb.m == 0 || cb.dim % cb.m != 0) {
        throw std::runtime_error("PqCodebook: bad header in " + path);
    }
    cb.sub_dim = cb.dim / cb.m;
    cb.centroids.resize(static_cast<std::size_t>(cb.m) * kCentroids * cb.sub_dim);
    in.read(reinterpret_cast<char*>(cb.centroids.data()),
            static_cast<std::streamsize>(cb.centroids.size() * sizeof(float)));
    if (!in) throw std::runtime_error("PqCodebook: truncated file: " + path);
    return cb;
}

PqCodebook train_pq(std::span<const FloatVector> sample, std::uint32_t m, std::uint32_t iters,
                    std::uint64_t seed, PqTrainLog* log) {
    constexpr std::uint32_t k = PqCodebook::kCentroids;
    if (sample.size() < k) throw std::invalid_argument("train_pq: need at least 256 sample vectors");
    const std::uint32_t dim = static_cast<std::uint32_t>(sample[0].size());
    if (m == 0 || dim % m != 0) throw std::invalid_argument("train_pq: m must divide dim");
    const std::uint32_t sub_dim = dim / m;
    const std::size_t n = sample.size();

    PqCodebook cb;
    cb.dim = dim;
    cb.m = m;
    cb.sub_dim = sub_dim;
    cb.centroids.assign(static_cast<std::size_t>(m) * k * sub_dim, 0.0f);

    std::mt19937_64 rng(seed);
    std::vector<float> min_dist(n);
    std::vector<std::uint32_t> assign(n);
    std::vector<double> acc(static_cast<std::size_t>(k) * sub_dim);
    std::vector<std::uint32_t> counts(k);

    for (std::uint32_t s = 0; s < m; ++s) {
        float* table = cb.centroids.data() + static_cast<std::size_t>(s) * k * sub_dim;
        const auto sub_of = [&](std::size_t i) { return sample[i].data() + static_cast<std::size_t>(s) * sub_dim; };

        // k-means++ seeding.
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::copy_n(sub_of(pick(rng)), sub_dim, table);
        for (std::size_t i = 0; i < n; ++i) min_dist[i] = sub_l2(sub_of(i), table, sub_dim);
        for (std::uint32_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += min_dist[i];
            std::size_t chosen;
            if (total <= 0.0) {
                chosen = pick(rng);  // all points already representable
            } else {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng), run = 0.0;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    run += min_dist[i];
                    if (run >= target) {
                        chosen = i;
                        break;
                    }
                }
            }
            float* dst = table + static_cast<std::size_t>(c) * sub_dim;
            std::copy_n(sub_of(chosen), sub_dim, dst);
            for (std::size_t i = 0; i < n; ++i) {
                min_dist[i] = std::min(min_dist[i], sub_l2(sub_of(i), dst, sub_dim));
            }
        }

        // Lloyd iterations with early stop on relative error change < 1e-5.
        double prev_err = -1.0;
        for (std::uint32_t it = 0; it < iters; ++it) {
            std::fill(acc.begin(), acc.end(), 0.0);
            std::fill(counts.begin(), counts.end(), 0u);
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                float d;
                const std::uint32_t c = nearest_centroid(sub_of(i), table, k, sub_dim, &d);
                assign[i] = c;
                err += d;
                counts[c]++;
                double* a = acc.data() + static_cast<std::size_t>(c) * sub_dim;
                const float* p = sub_of(i);
                for (std::uint32_t j = 0; j < sub_dim; ++j) a[j] += p[j];
            }
            err /= static_cast<double>(n);
            for (std::uint32_t c = 0; c < k; ++c) {
                float* dst = table + static_cast<std::size_t>(c) * sub_dim;
                if (counts[c] > 0) {
                    const double* a = acc.data() + static_cast<std::size_t>(c) * sub_dim;
                    for (std::uint32_t j = 0; j < sub_dim; ++j) {
                        dst[j] = static_cast<float>(a[j] / counts[c]);
                    }
                } else {
                    // Re-seed an empty cluster to the point farthest from its
                    // assigned centroid (ties to the lowest index).
                    std::size_t far = 0;
                    float far_d = -1.0f;
                    for (std::size_t i = 0; i < n; ++i) {
                        const float d = sub_l2(sub_of(i),
                                               table + static_cast<std::size_t>(assign[i]) * sub_dim, sub_dim);
                        if (d > far_d) {
                            far_d = d;
                            far = i;
                        }
                    }
                    std::copy_n(sub_of(far), sub_dim, dst);
                }
            }
            if (log) {
                if (log->iteration_errors.size() <= it) log->iteration_errors.resize(it + 1, 0.0);
                log->iteration_errors[it] += err / m;
            }
            if (prev_err >= 0.0 && prev_err > 0.0 &&
                std::abs(prev_err - err) / prev_err < 1e-5) {
                break;
            }
            if (prev_err == 0.0 && err == 0.0) break;
            prev_err = err;
        }
    }
    return cb;
}

PqCode pq_encode(const PqCodebook& cb, std::span<const float> v) {
    if (v.size() != cb.dim) throw std::invalid_argument("pq_encode: dimensionality mismatch");
    PqCode code(cb.m);
    for (std::uint32_t s = 0; s < cb.m; ++s) {
        const float* sub = v.data() + static_cast<std::size_t>(s) * cb.sub_dim;
        const float* table = cb.centroids.data() + static_cast<std::size_t>(s) * PqCodebook::kCentroids * cb.sub_dim;
        code[s] = static_cast<std::uint8_t>(nearest_centroid(sub, table, PqCodebook::kCentroids, cb.sub_dim));
    }
    return code;
}

DistanceTable build_distance_table(const PqCodebook& cb, std::span<const float> q) {
    if (q.size() != cb.dim) throw std::invalid_argument("build_distance_table: dimensionality mismatch");
    DistanceTable t;
    t.m = cb.m;
    t.values.resize(static_cast<std::size_t>(cb.m) * PqCodebook::kCentroids);
    for (std::uint32_t s = 0; s < cb.m; ++s) {
        const float* sub = q.data() + static_cast<std::size_t>(s) * cb.sub_dim;
        for (std::uint32_t c = 0; c < PqCodebook::kCentroids; ++c) {
            t.values[static_cast<std::size_t>(s) * PqCodebook::kCentroids + c] =
                sub_l2(sub, cb.centroid(s, c), cb.sub_dim);
        }
    }
    return t;
}

PqCodebook identity_codebook(std::span<const FloatVector> dataset) {
    if (dataset.empty()) throw std::invalid_argument("identity_codebook: empty dataset");
    const std::uint32_t dim = static_cast<std::uint32_t>(dataset[0].size());

    std::vector<FloatVector> distinct;
    distinct.reserve(PqCodebook::kCentroids);
    for (const FloatVector& v : dataset) {
        if (v.size() != dim) throw std::invalid_argument("identity_codebook: dimensionality drift");
        if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) {
            distinct.push_back(v);
            if (distinct.size() > PqCodebook::kCentroids) {
                throw std::invalid_argument("identity_codebook: more than 256 distinct vectors");
            }
        }
    }

    PqCodebook cb;
    cb.dim = dim;
    cb.m = 1;
    cb.sub_dim = dim;
    cb.centroids.assign(static_cast<std::size_t>(PqCodebook::kCentroids) * dim, 0.0f);
    for (std::uint32_t c = 0; c < PqCodebook::kCentroids; ++c) {
        // Unused tail entries repeat the last distinct vector; the encode
        // tie-break (lowest index) keeps codes unique.
        const FloatVector& src = distinct[std::min<std::size_t>(c, distinct.size() - 1)];
        std::copy(src.begin(), src.end(), cb.centroids.begin() + static_cast<std::size_t>(c) * dim);
    }
    return cb;
}

PqCrossTables::PqCrossTables(const PqCodebook& cb) : m_(cb.m) {
    tables_.resize(static_cast<std::size_t>(cb.m) * 256 * 256);
    for (std::uint32_t s = 0; s < cb.m; ++s) {
        for (std::uint32_t a = 0; a < 256; ++a) {
            for (std::uint32_t b = 0; b < 256; ++b) {
                tables_[(static_cast<std::size_t>(s) * 256 + a) * 256 + b] =
                    sub_l2(cb.centroid(s, a), cb.centroid(s, b), cb.sub_dim);
            }
        }
    }
}

void PqCodeStore::save(const std::string& path, std::uint64_t count) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("PqCodeStore: cannot open for write: " + path);
    out.write(reinterpret_cast<const char*>(codes_.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(count) * m_));
    if (!out) throw std::runtime_error("PqCodeStore: write failed: " + path);
}

void PqCodeStore::load(const std::string& path, std::uint32_t m, std::uint64_t count,
                       std::uint64_t capacity) {
    reset(m, std::max(capacity, count));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("PqCodeStore: cannot open: " + path);
    in.read(reinterpret_cast<char*>(codes_.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(count) * m));
    if (!in) throw std::runtime_error("PqCodeStore: truncated file: " + path);
}

}  // namespace navis
