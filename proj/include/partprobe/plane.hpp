#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace partprobe {

/// Row-major 2D grid.
template <class T>
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}

  T& operator()(std::size_t y, std::size_t x) { return data[y * width + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  std::span<T> row(std::size_t y) { return std::span<T>(data).subspan(y * width, width); }
  std::span<const T> row(std::size_t y) const {
    return std::span<const T>(data).subspan(y * width, width);
  }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

/// Values are 0 or 1.
using BinaryMask = Plane<std::uint8_t>;
using ProbabilityMap = Plane<float>;

}  // namespace partprobe
