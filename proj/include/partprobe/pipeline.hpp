#pragma once

// Building blocks of the concept model, templated on the scalar type so the
// same code runs in f32 for training and in f64 for gradient verification.
// Instantiated for float and double in pipeline.cpp.

#include <cstddef>
#include <span>
#include <vector>

namespace partprobe::pipeline {

struct KernelShape {
  std::size_t channels = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;

  std::size_t size() const noexcept { return channels * kh * kw; }
};

/// C x H x W activation, channel-major.
template <class T>
struct ActivationView {
  std::span<const T> data;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Zero-padded "same" cross-correlation with one output filter:
/// out[y][x] = bias + sum_{c,dy,dx} k[c][dy][dx] * act[c][y+dy-ph][x+dx-pw].
template <class T>
void correlate_same(const ActivationView<T>& act, std::span<const T> kernel,
                    const KernelShape& shape, T bias, std::span<T> out);

/// Adds d(out)/d(kernel) . grad_out into dkernel and the sum of grad_out into
/// dbias.
template <class T>
void correlate_same_backward(const ActivationView<T>& act, std::span<const T> grad_out,
                             const KernelShape& shape, std::span<T> dkernel, T& dbias);

/// Source taps for one axis under half-pixel-center sampling:
/// src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
struct AxisSampling {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;
  std::vector<double> frac;  // weight of `hi`
};

AxisSampling axis_sampling(std::size_t in, std::size_t out);

template <class T>
void bilinear_upscale(std::span<const T> in, std::size_t in_h, std::size_t in_w,
                      std::size_t out_h, std::size_t out_w, std::span<T> out);

/// Transpose of bilinear_upscale: splats grad_out back with the same weights
/// and overwrites grad_in.
template <class T>
void bilinear_upscale_adjoint(std::span<const T> grad_out, std::size_t out_h, std::size_t out_w,
                              std::size_t in_h, std::size_t in_w, std::span<T> grad_in);

}  // namespace partprobe::pipeline
