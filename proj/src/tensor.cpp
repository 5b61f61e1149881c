#include "partprobe/tensor.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <numeric>

#include "partprobe/error.hpp"
#include "partprobe/simd.hpp"

namespace partprobe {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                               std::multiplies<>());
  if (shape_.empty() || expected != data_.size()) {
    fail(ErrorKind::shape, "tensor extents hold " + std::to_string(expected) +
                               " elements but data has " + std::to_string(data_.size()));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) fail(ErrorKind::format, "tensor contains a non-finite value");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

std::vector<std::uint8_t> encode_bf16(std::span<const float> values) {
  std::vector<std::uint16_t> halves(values.size());
  simd::active_kernels().encode_bf16(values.data(), halves.data(), values.size());
  std::vector<std::uint8_t> bytes(values.size() * 2);
  for (std::size_t i = 0; i < halves.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(halves[i] & 0xff);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(halves[i] >> 8);
  }
  return bytes;
}

std::vector<float> decode_bf16(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 2 != 0) {
    fail(ErrorKind::format, "bf16 payload has odd length " + std::to_string(bytes.size()));
  }
  const std::size_t n = bytes.size() / 2;
  std::vector<std::uint16_t> halves(n);
  if constexpr (std::endian::native == std::endian::little) {
    if (n > 0) std::memcpy(halves.data(), bytes.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      halves[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    }
  }
  std::vector<float> values(n);
  simd::active_kernels().decode_bf16(halves.data(), values.data(), n);
  return values;
}

const char* to_string(DType dtype) noexcept {
  return dtype == DType::bf16 ? "bf16" : "f32";
}

DType parse_dtype(const std::string& name) {
  if (name == "bf16") return DType::bf16;
  if (name == "f32") return DType::f32;
  fail(ErrorKind::format, "unknown dtype tag '" + name + "'");
}

std::size_t bytes_per_element(DType dtype) noexcept { return dtype == DType::bf16 ? 2 : 4; }

}  // namespace partprobe
