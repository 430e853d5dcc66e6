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

#include <atomic>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "navis/core.hpp"

namespace navis {

inline constexpr std::size_t kPageSize = 4096;
inline constexpr std::size_t kQueueDepth = 256;

enum class FileRole : std::uint8_t { kEdge = 0, kVector = 1 };

struct PageId {
    FileRole role = FileRole::kEdge;
    std::uint64_t page_no = 0;

    bool operator==(const PageId&) const = default;
};

/// 4096-byte aligned page buffer.
class PageBuffer {
public:
    PageBuffer() : data_(static_cast<std::uint8_t*>(::operator new(kPageSize, std::align_val_t{kPageSize}))) {
        std::memset(data_, 0, kPageSize);
    }
    ~PageBuffer() { ::operator delete(data_, std::align_val_t{kPageSize}); }
    PageBuffer(const PageBuffer&) = delete;
    PageBuffer& operator=(const PageBuffer&) = delete;
    PageBuffer(PageBuffer&& o) noexcept : data_(o.data_) { o.data_ = nullptr; }
    PageBuffer& operator=(PageBuffer&& o) noexcept {
        std::swap(data_, o.data_);
        return *this;
    }

    std::uint8_t* data() { return data_; }
    const std::uint8_t* data() const { return data_; }

private:
    std::uint8_t* data_;
};

struct IoRequest {
    PageId page;
    void* buffer = nullptr;  // 4096 bytes, 4096-byte aligned
    bool is_write = false;
};

class IoBatch {
public:
    void add_read(PageId page, void* dst) { requests_.push_back({page, dst, false}); }
    void add_write(PageId page, const void* src) {
        requests_.push_back({page, const_cast<void*>(src), true});
    }

    const std::vector<IoRequest>& requests() const { return requests_; }
    std::size_t size() const { return requests_.size(); }
    bool empty() const { return requests_.empty(); }

private:
    std::vector<IoRequest> requests_;
};

struct Completion {
    PageId page;
    int status = 0;  // 0 = OK, otherwise errno-style code
};

struct CompletionSet {
    std::vector<Completion> completions;

    bool all_ok() const {
        for (const Completion& c : completions) {
            if (c.status != 0) return false;
        }
        return true;
    }
    std::size_t size() const { return completions.size(); }
};

class IoBackend;

/// Handle for an in-flight batch. Single-waiter; waiting twice is an error.
class BatchTicket {
public:
    BatchTicket() = default;
    bool valid() const { return backend_ != nullptr; }

private:
    friend class IoBackend;
    IoBackend* backend_ = nullptr;
    std::uint64_t id = 0;
    std::vector<IoRequest> pending;
    std::uint32_t submission_chunks = 0;
};

struct IoCounters {
    std::atomic<std::uint64_t> submissions{0};
    std::atomic<std::uint64_t> batches{0};
    std::atomic<std::uint64_t> pages_read{0};
    std::atomic<std::uint64_t> pages_written{0};
    std::atomic<std::uint64_t> edge_pages_read{0};
    std::atomic<std::uint64_t> vector_pages_read{0};
};

/// Batched page-granular storage access. One submission action per batch
/// (batches above the queue depth split and count as multiple submissions);
/// completions are harvested in bulk by wait_batch.
class IoBackend {
public:
    virtual ~IoBackend() = default;

    BatchTicket submit(IoBatch&& batch);
    CompletionSet wait_batch(BatchTicket& ticket);

    virtual std::uint64_t allocate_pages(FileRole role, std::uint64_t count) = 0;
    virtual void truncate_pages(FileRole role, std::uint64_t new_count) = 0;
    virtual void flush(FileRole role) = 0;
    virtual std::uint64_t page_count(FileRole role) const = 0;

    const IoCounters& counters() const { return counters_; }

protected:
    virtual int do_request(const IoRequest& req) = 0;

    IoCounters counters_;

private:
    std::atomic<std::uint64_t> next_ticket_{1};
};

/// Heap-backed backend for unit/property tests; supports fault injection.
class MemoryBackend : public IoBackend {
public:
    std::uint64_t allocate_pages(FileRole role, std::uint64_t count) override;
    void truncate_pages(FileRole role, std::uint64_t new_count) override;
    void flush(FileRole role) override;
    std::uint64_t page_count(FileRole role) const override;

    // Next N requests touching `page` fail with EIO.
    void inject_fault(PageId page, int times = 1);

protected:
    int do_request(const IoRequest& req) override;

private:
    struct File {
        std::vector<std::unique_ptr<PageBuffer>> pages;
    };
    File& file_for(FileRole role) { return files_[static_cast<int>(role)]; }
    const File& file_for(FileRole role) const { return files_[static_cast<int>(role)]; }

    mutable std::mutex mutex_;
    File files_[2];
    std::vector<std::pair<PageId, int>> faults_;
};

/// File-backed backend over edges.bin / vectors.bin in an index directory.
/// Tries O_DIRECT; falls back to buffered I/O with a one-time warning.
class FileBackend : public IoBackend {
public:
    explicit FileBackend(const std::string& dir, bool create, bool try_direct = true);
    ~FileBackend() override;

    std::uint64_t allocate_pages(FileRole role, std::uint64_t count) override;
    void truncate_pages(FileRole role, std::uint64_t new_count) override;
    void flush(FileRole role) override;
    std::uint64_t page_count(FileRole role) const override;

    bool direct_io() const { return direct_io_; }
    static std::string file_name(FileRole role);

protected:
    int do_request(const IoRequest& req) override;

private:
    int fd_for(FileRole role) const { return fds_[static_cast<int>(role)]; }

    mutable std::mutex grow_mutex_;
    int fds_[2] = {-1, -1};
    std::uint64_t page_counts_[2] = {0, 0};
    bool direct_io_ = false;
};

}  // namespace navis
