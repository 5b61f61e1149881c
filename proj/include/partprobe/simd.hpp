#pragma once

// Data-parallel inner loops used by the concept model pipeline.
//
// Every kernel has a scalar reference in `ref` (templated so the f64
// verification path reuses it) and optional vector variants. The float
// overloads at the bottom route through the table chosen once at startup;
// double overloads always use the reference.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace partprobe::simd {

namespace ref {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// y += a * x
template <class T>
void axpy(T* y, const T* x, T a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
T sum(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

// out = a + t * (b - a); exact when a == b
template <class T>
void lerp(T* out, const T* a, const T* b, T t, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
}

template <class T>
void sigmoid(T* out, const T* in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    // Split on sign so exp never overflows.
    const T z = in[i];
    if (z >= 0) {
      out[i] = T(1) / (T(1) + std::exp(-z));
    } else {
      const T e = std::exp(z);
      out[i] = e / (T(1) + e);
    }
  }
}

inline std::uint16_t bf16_from_f32(float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  if ((bits & 0x7fffffffu) > 0x7f800000u) {
    return static_cast<std::uint16_t>((bits >> 16) | 0x0040u);  // keep NaN quiet
  }
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  return static_cast<std::uint16_t>(bits >> 16);
}

inline float f32_from_bf16(std::uint16_t half) {
  const std::uint32_t bits = static_cast<std::uint32_t>(half) << 16;
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

inline void encode_bf16(const float* in, std::uint16_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = bf16_from_f32(in[i]);
}

inline void decode_bf16(const std::uint16_t* in, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = f32_from_bf16(in[i]);
}

}  // namespace ref

struct KernelTable {
  std::string_view name;
  float (*dot)(const float* a, const float* b, std::size_t n);
  void (*axpy)(float* y, const float* x, float a, std::size_t n);
  float (*sum)(const float* x, std::size_t n);
  void (*lerp)(float* out, const float* a, const float* b, float t, std::size_t n);
  void (*sigmoid)(float* out, const float* in, std::size_t n);
  void (*encode_bf16)(const float* in, std::uint16_t* out, std::size_t n);
  void (*decode_bf16)(const std::uint16_t* in, float* out, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// AVX2+FMA variants, or nullptr when not compiled in or the CPU lacks them.
const KernelTable* avx2_kernels() noexcept;

/// The table used by the float overloads. Picked on first use: the best
/// supported variant unless PARTPROBE_SIMD=scalar is set in the environment.
const KernelTable& active_kernels() noexcept;

/// Overrides the active table (tests and benchmarks). Not thread-safe with
/// respect to concurrent kernel calls.
void set_active_kernels(const KernelTable& table) noexcept;

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return ref::dot(a.data(), b.data(), a.size());
}

inline void axpy(std::span<float> y, std::span<const float> x, float a) {
  active_kernels().axpy(y.data(), x.data(), a, y.size());
}
inline void axpy(std::span<double> y, std::span<const double> x, double a) {
  ref::axpy(y.data(), x.data(), a, y.size());
}

inline float sum(std::span<const float> x) {
  return active_kernels().sum(x.data(), x.size());
}
inline double sum(std::span<const double> x) { return ref::sum(x.data(), x.size()); }

inline void lerp(std::span<float> out, std::span<const float> a, std::span<const float> b,
                 float t) {
  active_kernels().lerp(out.data(), a.data(), b.data(), t, out.size());
}
inline void lerp(std::span<double> out, std::span<const double> a, std::span<const double> b,
                 double t) {
  ref::lerp(out.data(), a.data(), b.data(), t, out.size());
}

inline void sigmoid(std::span<float> out, std::span<const float> in) {
  active_kernels().sigmoid(out.data(), in.data(), out.size());
}
inline void sigmoid(std::span<double> out, std::span<const double> in) {
  ref::sigmoid(out.data(), in.data(), out.size());
}

}  // namespace partprobe::simd
