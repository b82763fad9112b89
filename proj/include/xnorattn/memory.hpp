#pragma once

#include <atomic>
#include <cstddef>
#include <memory>

namespace xnorattn {

// Process-wide byte accounting for matrix storage. Engines never allocate
// matrix data outside TrackingAllocator, so the peak seen inside a
// MemoryScope is the engine's working-set high-water mark.
namespace memory {

std::size_t current_bytes() noexcept;
std::size_t peak_bytes() noexcept;
void note_alloc(std::size_t bytes) noexcept;
void note_free(std::size_t bytes) noexcept;
/// Resets the recorded peak to the current level.
void reset_peak() noexcept;

}  // namespace memory

/// Measures the additional peak bytes allocated while the scope is alive.
class MemoryScope {
 public:
  MemoryScope() noexcept : base_(memory::current_bytes()) { memory::reset_peak(); }
  MemoryScope(const MemoryScope&) = delete;
  MemoryScope& operator=(const MemoryScope&) = delete;

  std::size_t peak_delta() const noexcept {
    const std::size_t peak = memory::peak_bytes();
    return peak > base_ ? peak - base_ : 0;
  }

 private:
  std::size_t base_;
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    memory::note_alloc(n * sizeof(T));
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    memory::note_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace xnorattn
