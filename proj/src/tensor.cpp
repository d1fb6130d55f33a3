#include "cartoon/tensor.hpp"

#include <cmath>

namespace cr {

std::atomic<std::size_t> MemoryTracker::live_{0};
std::atomic<std::size_t> MemoryTracker::peak_{0};
std::atomic<std::size_t> MemoryTracker::limit_{0};

void MemoryTracker::check(std::size_t bytes) {
  const std::size_t lim = limit_.load();
  if (lim != 0 && live_.load() + bytes > lim) {
    throw MemoryBudgetError("allocation of " + std::to_string(bytes) + " bytes would exceed the memory limit of " +
                            std::to_string(lim) + " bytes (" + std::to_string(live_.load()) + " live)");
  }
}

void MemoryTracker::set_limit(std::size_t bytes) noexcept { limit_.store(bytes); }
std::size_t MemoryTracker::limit() noexcept { return limit_.load(); }

void MemoryTracker::add(std::size_t bytes) noexcept {
  const std::size_t now = live_.fetch_add(bytes) + bytes;
  std::size_t prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }
}

void MemoryTracker::release(std::size_t bytes) noexcept { live_.fetch_sub(bytes); }
std::size_t MemoryTracker::live() noexcept { return live_.load(); }
std::size_t MemoryTracker::peak() noexcept { return peak_.load(); }
void MemoryTracker::reset_peak() noexcept { peak_.store(live_.load()); }

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace cr
