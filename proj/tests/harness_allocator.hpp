#ifndef REFCAST_TESTS_HARNESS_ALLOCATOR_HPP
#define REFCAST_TESTS_HARNESS_ALLOCATOR_HPP

// Test-harness allocator: a thread-local size-bucketed freelist behind global
// new/delete. The windowing sweep churns through ~250M small vectors, which
// is allocator-bound under the default malloc; recycling buckets keeps the
// sweep inside its runtime budget. General-purpose and correct for every
// size; blocks larger than the top bucket fall through to malloc.

#include <cstdint>
#include <cstdlib>
#include <new>

namespace harness_alloc {

constexpr std::size_t kMaxBucketBytes = 4096;
constexpr std::size_t kHeader = 16;  // keeps 16-byte payload alignment
constexpr std::uint64_t kLargeTag = 0xFFFF;

inline int bucket_of(std::size_t payload) {
    std::size_t need = payload < 8 ? 8 : payload;
    int b = 3;
    while ((std::size_t{1} << b) < need) ++b;
    return b;
}

struct FreeList {
    void* head = nullptr;
};
inline thread_local FreeList tls_lists[13];  // buckets 2^3 .. 2^12

inline void* allocate(std::size_t size) {
    if (size == 0) size = 1;
    if (size > kMaxBucketBytes) {
        void* raw = std::malloc(size + kHeader);
        if (raw == nullptr) return nullptr;
        *static_cast<std::uint64_t*>(raw) = kLargeTag;
        return static_cast<char*>(raw) + kHeader;
    }
    const int b = bucket_of(size);
    FreeList& list = tls_lists[b];
    if (list.head != nullptr) {
        void* block = list.head;
        list.head = *static_cast<void**>(block);
        *static_cast<std::uint64_t*>(block) = static_cast<std::uint64_t>(b);
        return static_cast<char*>(block) + kHeader;
    }
    void* raw = std::malloc((std::size_t{1} << b) + kHeader);
    if (raw == nullptr) return nullptr;
    *static_cast<std::uint64_t*>(raw) = static_cast<std::uint64_t>(b);
    return static_cast<char*>(raw) + kHeader;
}

inline void deallocate(void* payload) noexcept {
    if (payload == nullptr) return;
    void* raw = static_cast<char*>(payload) - kHeader;
    const std::uint64_t tag = *static_cast<std::uint64_t*>(raw);
    if (tag == kLargeTag) {
        std::free(raw);
        return;
    }
    FreeList& list = tls_lists[tag];
    *static_cast<void**>(raw) = list.head;
    list.head = raw;
}

}  // namespace harness_alloc

void* operator new(std::size_t size) {
    void* p = harness_alloc::allocate(size);
    if (p == nullptr) throw std::bad_alloc();
    return p;
}
void* operator new[](std::size_t size) { return ::operator new(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
    return harness_alloc::allocate(size);
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
    return harness_alloc::allocate(size);
}
void operator delete(void* p) noexcept { harness_alloc::deallocate(p); }
void operator delete[](void* p) noexcept { harness_alloc::deallocate(p); }
void operator delete(void* p, std::size_t) noexcept { harness_alloc::deallocate(p); }
void operator delete[](void* p, std::size_t) noexcept { harness_alloc::deallocate(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept {
    harness_alloc::deallocate(p);
}
void operator delete[](void* p, const std::nothrow_t&) noexcept {
    harness_alloc::deallocate(p);
}

#endif  // REFCAST_TESTS_HARNESS_ALLOCATOR_HPP
