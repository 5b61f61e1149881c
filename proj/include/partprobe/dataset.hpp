#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "partprobe/plane.hpp"

namespace partprobe {

/// A cache sample id paired with its ground-truth mask. The mask is either
/// held in memory or read from a PGM file each time it is needed, so large
/// datasets never have to be resident.
struct LabeledSample {
  std::string id;
  std::shared_ptr<const BinaryMask> mask;
  std::filesystem::path mask_path;

  BinaryMask load_mask() const;
};

using Dataset = std::vector<LabeledSample>;

/// Small deterministic generator (splitmix64) with portable derived
/// distributions; std distributions differ between standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }
  /// Standard normal (Box-Muller).
  double normal() noexcept;

  template <class Vec>
  void shuffle(Vec& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      using std::swap;
      swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace partprobe
