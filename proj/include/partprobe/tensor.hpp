#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace partprobe {

/// Dense row-major f32 tensor (last index fastest). Immutable once built.
class Tensor {
 public:
  Tensor() = default;

  /// Throws shape error if the extents disagree with the data length and
  /// format error if any value is NaN or infinite.
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  static Tensor zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }

  /// Element (c, y, x) of a rank-3 tensor.
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Contiguous plane c of a rank-3 tensor.
  std::span<const float> channel(std::size_t c) const {
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<const float>(data_).subspan(c * plane, plane);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

/// Round-to-nearest-even conversion, two little-endian bytes per value.
std::vector<std::uint8_t> encode_bf16(std::span<const float> values);

/// Zero-fills the low mantissa half. Odd byte counts are a format error.
std::vector<float> decode_bf16(std::span<const std::uint8_t> bytes);

enum class DType { bf16, f32 };

const char* to_string(DType dtype) noexcept;
DType parse_dtype(const std::string& name);
std::size_t bytes_per_element(DType dtype) noexcept;

struct CacheManifest {
  std::string layer;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  DType dtype = DType::bf16;
  std::vector<std::string> samples;

  std::size_t elements_per_sample() const noexcept { return channels * height * width; }
};

/// A directory holding `manifest.json` plus one `<id>.act` payload per
/// sample. Reads open the payload file on demand, so concurrent readers are
/// fine and nothing is kept resident.
class ActivationCache {
 public:
  /// Reads and validates `manifest.json` in `directory`.
  static ActivationCache open(const std::filesystem::path& directory);

  const CacheManifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& directory() const noexcept { return directory_; }
  bool contains(const std::string& id) const;

  /// (C, H, W) tensor for `id`. Missing-sample error if the id is not in the
  /// manifest, corrupt-cache error if the payload has the wrong length.
  Tensor read_sample(const std::string& id) const;

 private:
  std::filesystem::path directory_;
  CacheManifest manifest_;
  std::vector<std::string> sorted_ids_;
};

/// Single-writer builder for a cache directory. The manifest is written by
/// finish(); payloads are written as samples arrive.
class ActivationCacheWriter {
 public:
  ActivationCacheWriter(std::filesystem::path directory, std::string layer,
                        std::size_t channels, std::size_t height, std::size_t width,
                        DType dtype);

  void write_sample(const std::string& id, const Tensor& activation);
  void finish();

 private:
  std::filesystem::path directory_;
  CacheManifest manifest_;
};

std::filesystem::path payload_path(const std::filesystem::path& directory,
                                   const std::string& id);

}  // namespace partprobe
