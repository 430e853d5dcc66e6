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

#include <doctest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>

#include "navis/io_backend.hpp"

using namespace navis;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("navis_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void fill_pattern(PageBuffer& buf, std::uint8_t seed) {
    for (std::size_t i = 0; i < kPageSize; ++i) buf.data()[i] = static_cast<std::uint8_t>(seed + i);
}

}  // namespace

TEST_CASE("memory backend: write then read round-trips one page") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kEdge, 1);
    PageBuffer w, r;
    fill_pattern(w, 3);
    IoBatch wb;
    wb.add_write({FileRole::kEdge, 0}, w.data());
    auto wt = be.submit(std::move(wb));
    CHECK(be.wait_batch(wt).all_ok());

    IoBatch rb;
    rb.add_read({FileRole::kEdge, 0}, r.data());
    auto rt = be.submit(std::move(rb));
    auto done = be.wait_batch(rt);
    REQUIRE(done.size() == 1);
    CHECK(done.all_ok());
    CHECK(std::memcmp(w.data(), r.data(), kPageSize) == 0);
}

TEST_CASE("empty batch is rejected") {
    MemoryBackend be;
    IoBatch batch;
    CHECK_THROWS_AS(be.submit(std::move(batch)), std::invalid_argument);
}

TEST_CASE("misaligned buffer is rejected before submission") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kEdge, 1);
    alignas(4096) static std::uint8_t raw[kPageSize + 8];
    IoBatch batch;
    batch.add_read({FileRole::kEdge, 0}, raw + 4);
    CHECK_THROWS_AS(be.submit(std::move(batch)), std::invalid_argument);
}

TEST_CASE("read past end of file is rejected") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kVector, 2);
    PageBuffer buf;
    IoBatch batch;
    batch.add_read({FileRole::kVector, 5}, buf.data());
    CHECK_THROWS_AS(be.submit(std::move(batch)), std::out_of_range);
}

TEST_CASE("a batch of 8 reads records one submission action") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kVector, 8);
    std::vector<PageBuffer> bufs(8);
    IoBatch batch;
    for (int i = 0; i < 8; ++i) batch.add_read({FileRole::kVector, static_cast<std::uint64_t>(i)}, bufs[i].data());
    const auto before = be.counters().submissions.load();
    auto t = be.submit(std::move(batch));
    CHECK(be.counters().submissions.load() == before + 1);
    auto done = be.wait_batch(t);
    CHECK(done.size() == 8);
    CHECK(done.all_ok());
}

TEST_CASE("batches above the queue depth split into multiple submissions") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kEdge, kQueueDepth + 10);
    std::vector<PageBuffer> bufs(kQueueDepth + 10);
    IoBatch batch;
    for (std::size_t i = 0; i < bufs.size(); ++i) {
        batch.add_read({FileRole::kEdge, i}, bufs[i].data());
    }
    const auto before = be.counters().submissions.load();
    auto t = be.submit(std::move(batch));
    CHECK(be.counters().submissions.load() == before + 2);
    CHECK(be.wait_batch(t).all_ok());
}

TEST_CASE("double wait on a ticket is an error") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kEdge, 1);
    PageBuffer buf;
    IoBatch batch;
    batch.add_read({FileRole::kEdge, 0}, buf.data());
    auto t = be.submit(std::move(batch));
    be.wait_batch(t);
    CHECK_THROWS_AS(be.wait_batch(t), std::logic_error);
}

TEST_CASE("fault injection surfaces per-request errors with the failing page") {
    MemoryBackend be;
    be.allocate_pages(FileRole::kEdge, 4);
    be.inject_fault({FileRole::kEdge, 2});
    std::vector<PageBuffer> bufs(4);
    IoBatch batch;
    for (int i = 0; i < 4; ++i) batch.add_read({FileRole::kEdge, static_cast<std::uint64_t>(i)}, bufs[i].data());
    auto t = be.submit(std::move(batch));
    auto done = be.wait_batch(t);
    REQUIRE(done.size() == 4);  // no request silently dropped
    int failures = 0;
    for (const auto& c : done.completions) {
        if (c.status != 0) {
            ++failures;
            CHECK(c.page.page_no == 2);
        }
    }
    CHECK(failures == 1);
}

TEST_CASE("allocation is contiguous") {
    MemoryBackend be;
    CHECK(be.allocate_pages(FileRole::kEdge, 1) == 0);
    CHECK(be.allocate_pages(FileRole::kEdge, 1) == 1);
    CHECK(be.allocate_pages(FileRole::kEdge, 3) == 2);
    CHECK(be.page_count(FileRole::kEdge) == 5);
}

TEST_CASE("file backend: flush then reopen preserves completed writes") {
    TempDir dir;
    {
        FileBackend be(dir.path.string(), /*create=*/true);
        be.allocate_pages(FileRole::kEdge, 3);
        PageBuffer w;
        fill_pattern(w, 42);
        IoBatch batch;
        batch.add_write({FileRole::kEdge, 2}, w.data());
        auto t = be.submit(std::move(batch));
        REQUIRE(be.wait_batch(t).all_ok());
        be.flush(FileRole::kEdge);
    }
    {
        FileBackend be(dir.path.string(), /*create=*/false);
        CHECK(be.page_count(FileRole::kEdge) == 3);
        PageBuffer r, expect;
        fill_pattern(expect, 42);
        IoBatch batch;
        batch.add_read({FileRole::kEdge, 2}, r.data());
        auto t = be.submit(std::move(batch));
        REQUIRE(be.wait_batch(t).all_ok());
        CHECK(std::memcmp(r.data(), expect.data(), kPageSize) == 0);
    }
}

TEST_CASE("file backend: read-your-writes across batches") {
    TempDir dir;
    FileBackend be(dir.path.string(), /*create=*/true);
    be.allocate_pages(FileRole::kVector, 2);
    PageBuffer w, r;
    fill_pattern(w, 9);
    IoBatch wb;
    wb.add_write({FileRole::kVector, 1}, w.data());
    auto wt = be.submit(std::move(wb));
    REQUIRE(be.wait_batch(wt).all_ok());
    IoBatch rb;
    rb.add_read({FileRole::kVector, 1}, r.data());
    auto rt = be.submit(std::move(rb));
    REQUIRE(be.wait_batch(rt).all_ok());
    CHECK(std::memcmp(w.data(), r.data(), kPageSize) == 0);
}
