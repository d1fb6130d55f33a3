#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cr {

/// Thrown for shape, sizing and argument-contract violations.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for unreadable or malformed input data (images, archives, configs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by tensor allocation when the MemoryTracker limit would be exceeded.
class MemoryBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Process-wide accounting of live tensor storage. Used by the tiled
/// inference path to demonstrate bounded peak memory.
class MemoryTracker {
 public:
  /// Throws MemoryBudgetError if a limit is set and `bytes` more would pass it.
  static void check(std::size_t bytes);
  /// 0 disables the limit.
  static void set_limit(std::size_t bytes) noexcept;
  static std::size_t limit() noexcept;
  static void add(std::size_t bytes) noexcept;
  static void release(std::size_t bytes) noexcept;
  static std::size_t live() noexcept;
  static std::size_t peak() noexcept;
  static void reset_peak() noexcept;

 private:
  static std::atomic<std::size_t> live_;
  static std::atomic<std::size_t> peak_;
  static std::atomic<std::size_t> limit_;
};

/// Sets a MemoryTracker limit for the current scope and restores the old one.
class MemoryLimitScope {
 public:
  explicit MemoryLimitScope(std::size_t bytes) : prev_(MemoryTracker::limit()) { MemoryTracker::set_limit(bytes); }
  ~MemoryLimitScope() { MemoryTracker::set_limit(prev_); }
  MemoryLimitScope(const MemoryLimitScope&) = delete;
  MemoryLimitScope& operator=(const MemoryLimitScope&) = delete;

 private:
  std::size_t prev_;
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = n * sizeof(T);
    MemoryTracker::check(bytes);
    void* p = ::operator new(bytes, std::align_val_t{kAlign});
    MemoryTracker::add(bytes);
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryTracker::release(n * sizeof(T));
    ::operator delete(p, std::align_val_t{kAlign});
  }
  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

/// NCHW extents. Scalars and vectors are expressed with unit extents.
struct Shape {
  std::int64_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Storage = std::vector<T, TrackingAllocator<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw ShapeError("negative tensor extent " + shape.str());
    }
    data_.assign(static_cast<std::size_t>(shape.numel()), fill);
  }
  Tensor(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, T fill = T(0))
      : Tensor(Shape{n, c, h, w}, fill) {}

  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::int64_t n() const { return shape_.n; }
  std::int64_t c() const { return shape_.c; }
  std::int64_t h() const { return shape_.h; }
  std::int64_t w() const { return shape_.w; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return {data_.data(), data_.size()}; }
  std::span<const T> span() const { return {data_.data(), data_.size()}; }

  T* plane(std::int64_t n, std::int64_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const T* plane(std::int64_t n, std::int64_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  T& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x)];
  }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same storage, new extents. Element count must match.
  Tensor reshaped(Shape s) const {
    if (s.numel() != shape_.numel()) {
      throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
    }
    Tensor out = *this;
    out.shape_ = s;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

 private:
  Shape shape_{};
  Storage data_;
};

bool all_finite(std::span<const float> v);
bool all_finite(std::span<const double> v);

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return all_finite(t.span());
}

/// Batch slice [begin, begin+count) along N.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t begin, std::int64_t count) {
  Tensor<T> out(count, t.c(), t.h(), t.w());
  const std::int64_t item = t.c() * t.shape().plane();
  std::copy(t.data() + begin * item, t.data() + (begin + count) * item, out.data());
  return out;
}

/// Spatial window [y0, y0+h) x [x0, x0+w) of every plane.
template <typename T>
Tensor<T> crop(const Tensor<T>& t, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
  if (y0 < 0 || x0 < 0 || y0 + h > t.h() || x0 + w > t.w()) {
    throw ShapeError("crop window out of range for " + t.shape().str());
  }
  Tensor<T> out(t.n(), t.c(), h, w);
  for (std::int64_t n = 0; n < t.n(); ++n) {
    for (std::int64_t c = 0; c < t.c(); ++c) {
      for (std::int64_t y = 0; y < h; ++y) {
        const T* src = &t.at(n, c, y0 + y, x0);
        std::copy(src, src + w, &out.at(n, c, y, 0));
      }
    }
  }
  return out;
}

}  // namespace cr
