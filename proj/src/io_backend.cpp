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

#include "navis/io_backend.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <stdexcept>

namespace navis {

namespace {

bool is_aligned(const void* p) { return (reinterpret_cast<std::uintptr_t>(p) % kPageSize) == 0; }

}  // namespace

BatchTicket IoBackend::submit(IoBatch&& batch) {
    if (batch.empty()) throw std::invalid_argument("IoBackend::submit: empty batch");
    for (const IoRequest& req : batch.requests()) {
        if (req.buffer == nullptr || !is_aligned(req.buffer)) {
            throw std::invalid_argument("IoBackend::submit: buffer must be 4096-byte aligned");
        }
        if (req.page.page_no >= page_count(req.page.role) && !req.is_write) {
            throw std::out_of_range("IoBackend::submit: read past end of file");
        }
        if (req.is_write && req.page.page_no >= page_count(req.page.role)) {
            throw std::out_of_range("IoBackend::submit: write past allocated pages");
        }
    }
    BatchTicket ticket;
    ticket.backend_ = this;
    ticket.id = next_ticket_.fetch_add(1, std::memory_order_relaxed);
    ticket.pending = batch.requests();
    // One submission action per batch; oversized batches split transparently.
    ticket.submission_chunks =
        static_cast<std::uint32_t>((ticket.pending.size() + kQueueDepth - 1) / kQueueDepth);
    counters_.submissions.fetch_add(ticket.submission_chunks, std::memory_order_relaxed);
    counters_.batches.fetch_add(1, std::memory_order_relaxed);
    return ticket;
}

CompletionSet IoBackend::wait_batch(BatchTicket& ticket) {
    if (ticket.backend_ != this) {
        throw std::invalid_argument("IoBackend::wait_batch: ticket not issued by this backend");
    }
    if (ticket.id == 0) throw std::logic_error("IoBackend::wait_batch: ticket already waited");

    CompletionSet set;
    set.completions.reserve(ticket.pending.size());
    for (const IoRequest& req : ticket.pending) {
        const int status = do_request(req);
        set.completions.push_back({req.page, status});
        if (status == 0) {
            if (req.is_write) {
                counters_.pages_written.fetch_add(1, std::memory_order_relaxed);
            } else {
                counters_.pages_read.fetch_add(1, std::memory_order_relaxed);
                if (req.page.role == FileRole::kEdge) {
                    counters_.edge_pages_read.fetch_add(1, std::memory_order_relaxed);
                } else {
                    counters_.vector_pages_read.fetch_add(1, std::memory_order_relaxed);
                }
            }
        }
    }
    ticket.id = 0;
    ticket.pending.clear();
    return set;
}

// ---------------------------------------------------------------------------
// MemoryBackend

std::uint64_t MemoryBackend::allocate_pages(FileRole role, std::uint64_t count) {
    std::lock_guard lock(mutex_);
    File& f = file_for(role);
    const std::uint64_t first = f.pages.size();
    for (std::uint64_t i = 0; i < count; ++i) f.pages.push_back(std::make_unique<PageBuffer>());
    return first;
}

void MemoryBackend::truncate_pages(FileRole role, std::uint64_t new_count) {
    std::lock_guard lock(mutex_);
    File& f = file_for(role);
    if (new_count > f.pages.size()) throw std::invalid_argument("truncate_pages: cannot grow");
    f.pages.resize(new_count);
}

void MemoryBackend::flush(FileRole) {}

std::uint64_t MemoryBackend::page_count(FileRole role) const {
    std::lock_guard lock(mutex_);
    return file_for(role).pages.size();
}

void MemoryBackend::inject_fault(PageId page, int times) {
    std::lock_guard lock(mutex_);
    faults_.emplace_back(page, times);
}

int MemoryBackend::do_request(const IoRequest& req) {
    std::lock_guard lock(mutex_);
    for (auto& [page, remaining] : faults_) {
        if (page == req.page && remaining > 0) {
            --remaining;
            return EIO;
        }
    }
    File& f = file_for(req.page.role);
    if (req.page.page_no >= f.pages.size()) return EINVAL;
    std::uint8_t* stored = f.pages[req.page.page_no]->data();
    if (req.is_write) {
        std::memcpy(stored, req.buffer, kPageSize);
    } else {
        std::memcpy(req.buffer, stored, kPageSize);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// FileBackend

std::string FileBackend::file_name(FileRole role) {
    return role == FileRole::kEdge ? "edges.bin" : "vectors.bin";
}

FileBackend::FileBackend(const std::string& dir, bool create, bool try_direct) {
    static std::atomic<bool> warned{false};
    for (int r = 0; r < 2; ++r) {
        const std::string path = dir + "/" + file_name(static_cast<FileRole>(r));
        int flags = O_RDWR | (create ? (O_CREAT | O_TRUNC) : 0);
        int fd = -1;
        if (try_direct) {
            fd = ::open(path.c_str(), flags | O_DIRECT, 0644);
        }
        if (fd < 0) {
            fd = ::open(path.c_str(), flags, 0644);
            if (fd >= 0 && try_direct && !warned.exchange(true)) {
                std::fprintf(stderr,
                             "navis: O_DIRECT unavailable for %s, falling back to buffered I/O\n",
                             path.c_str());
            }
        } else {
            direct_io_ = true;
        }
        if (fd < 0) {
            throw std::runtime_error("FileBackend: cannot open " + path);
        }
        fds_[r] = fd;
        struct stat st{};
        if (::fstat(fd, &st) != 0) throw std::runtime_error("FileBackend: fstat failed on " + path);
        if (st.st_size % kPageSize != 0) {
            throw std::runtime_error("FileBackend: file size not page-aligned: " + path);
        }
        page_counts_[r] = static_cast<std::uint64_t>(st.st_size) / kPageSize;
    }
}

FileBackend::~FileBackend() {
    for (int fd : fds_) {
        if (fd >= 0) ::close(fd);
    }
}

std::uint64_t FileBackend::allocate_pages(FileRole role, std::uint64_t count) {
    std::lock_guard lock(grow_mutex_);
    const int r = static_cast<int>(role);
    const std::uint64_t first = page_counts_[r];
    const off_t new_size = static_cast<off_t>((first + count) * kPageSize);
    if (::ftruncate(fd_for(role), new_size) != 0) {
        throw std::runtime_error("FileBackend: allocate_pages failed (disk full?)");
    }
    page_counts_[r] = first + count;
    return first;
}

void FileBackend::truncate_pages(FileRole role, std::uint64_t new_count) {
    std::lock_guard lock(grow_mutex_);
    const int r = static_cast<int>(role);
    if (new_count > page_counts_[r]) throw std::invalid_argument("truncate_pages: cannot grow");
    if (::ftruncate(fd_for(role), static_cast<off_t>(new_count * kPageSize)) != 0) {
        throw std::runtime_error("FileBackend: truncate failed");
    }
    page_counts_[r] = new_count;
}

void FileBackend::flush(FileRole role) {
    if (::fdatasync(fd_for(role)) != 0) {
        throw std::runtime_error("FileBackend: fdatasync failed");
    }
}

std::uint64_t FileBackend::page_count(FileRole role) const {
    std::lock_guard lock(grow_mutex_);
    return page_counts_[static_cast<int>(role)];
}

int FileBackend::do_request(const IoRequest& req) {
    const off_t offset = static_cast<off_t>(req.page.page_no * kPageSize);
    ssize_t n;
    if (req.is_write) {
        n = ::pwrite(fd_for(req.page.role), req.buffer, kPageSize, offset);
    } else {
        n = ::pread(fd_for(req.page.role), req.buffer, kPageSize, offset);
    }
    if (n != static_cast<ssize_t>(kPageSize)) return errno != 0 ? errno : EIO;
    return 0;
}

}  // namespace navis
