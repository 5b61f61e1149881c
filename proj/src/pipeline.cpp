#include "partprobe/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "partprobe/error.hpp"
#include "partprobe/simd.hpp"

namespace partprobe::pipeline {
namespace {

// Range of output columns x for which x + offset stays inside [0, width).
struct Overlap {
  std::size_t begin;
  std::size_t end;
};

Overlap overlap(std::size_t width, long offset) {
  const long w = static_cast<long>(width);
  const long b = std::max(0L, -offset);
  const long e = std::min(w, w - offset);
  if (e <= b) return {0, 0};
  return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
}

template <class T>
void check_shapes(const ActivationView<T>& act, std::size_t kernel_size, const KernelShape& shape,
                  std::size_t out_size) {
  if (act.channels != shape.channels) {
    fail(ErrorKind::shape, "activation has " + std::to_string(act.channels) +
                               " channels, kernel expects " + std::to_string(shape.channels));
  }
  if (kernel_size != shape.size() || shape.kh % 2 == 0 || shape.kw % 2 == 0) {
    fail(ErrorKind::shape, "kernel must be channels x odd x odd");
  }
  if (act.data.size() != act.channels * act.height * act.width ||
      out_size != act.height * act.width) {
    fail(ErrorKind::shape, "activation/output extents disagree");
  }
}

}  // namespace

template <class T>
void correlate_same(const ActivationView<T>& act, std::span<const T> kernel,
                    const KernelShape& shape, T bias, std::span<T> out) {
  check_shapes(act, kernel.size(), shape, out.size());
  const std::size_t H = act.height, W = act.width, plane = H * W;
  const long ph = static_cast<long>(shape.kh / 2), pw = static_cast<long>(shape.kw / 2);
  std::fill(out.begin(), out.end(), bias);

  for (std::size_t c = 0; c < shape.channels; ++c) {
    const T* src = act.data.data() + c * plane;
    for (std::size_t dy = 0; dy < shape.kh; ++dy) {
      for (std::size_t dx = 0; dx < shape.kw; ++dx) {
        const T w = kernel[(c * shape.kh + dy) * shape.kw + dx];
        if (w == T(0)) continue;
        const long oy = static_cast<long>(dy) - ph;
        const long ox = static_cast<long>(dx) - pw;
        const Overlap cols = overlap(W, ox);
        const std::size_t len = cols.end - cols.begin;
        if (len == 0) continue;
        for (std::size_t y = 0; y < H; ++y) {
          const long sy = static_cast<long>(y) + oy;
          if (sy < 0 || sy >= static_cast<long>(H)) continue;
          const T* src_row = src + static_cast<std::size_t>(sy) * W;
          simd::axpy(out.subspan(y * W + cols.begin, len),
                     std::span<const T>(src_row + static_cast<long>(cols.begin) + ox, len), w);
        }
      }
    }
  }
}

template <class T>
void correlate_same_backward(const ActivationView<T>& act, std::span<const T> grad_out,
                             const KernelShape& shape, std::span<T> dkernel, T& dbias) {
  check_shapes(act, dkernel.size(), shape, grad_out.size());
  const std::size_t H = act.height, W = act.width, plane = H * W;
  const long ph = static_cast<long>(shape.kh / 2), pw = static_cast<long>(shape.kw / 2);

  dbias += simd::sum(grad_out);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const T* src = act.data.data() + c * plane;
    for (std::size_t dy = 0; dy < shape.kh; ++dy) {
      for (std::size_t dx = 0; dx < shape.kw; ++dx) {
        const long oy = static_cast<long>(dy) - ph;
        const long ox = static_cast<long>(dx) - pw;
        const Overlap cols = overlap(W, ox);
        const std::size_t len = cols.end - cols.begin;
        T acc = 0;
        if (len > 0) {
          for (std::size_t y = 0; y < H; ++y) {
            const long sy = static_cast<long>(y) + oy;
            if (sy < 0 || sy >= static_cast<long>(H)) continue;
            const T* src_row = src + static_cast<std::size_t>(sy) * W;
            acc += simd::dot(grad_out.subspan(y * W + cols.begin, len),
                             std::span<const T>(src_row + static_cast<long>(cols.begin) + ox, len));
          }
        }
        dkernel[(c * shape.kh + dy) * shape.kw + dx] += acc;
      }
    }
  }
}

AxisSampling axis_sampling(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) fail(ErrorKind::shape, "bilinear extents must be positive");
  AxisSampling s;
  s.lo.resize(out);
  s.hi.resize(out);
  s.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const double last = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = std::clamp((static_cast<double>(i) + 0.5) * ratio - 0.5, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    s.lo[i] = lo;
    s.hi[i] = std::min(lo + 1, in - 1);
    s.frac[i] = src - static_cast<double>(lo);
  }
  return s;
}

template <class T>
void bilinear_upscale(std::span<const T> in, std::size_t in_h, std::size_t in_w,
                      std::size_t out_h, std::size_t out_w, std::span<T> out) {
  if (in.size() != in_h * in_w || out.size() != out_h * out_w) {
    fail(ErrorKind::shape, "bilinear buffer sizes disagree with extents");
  }
  const AxisSampling xs = axis_sampling(in_w, out_w);
  const AxisSampling ys = axis_sampling(in_h, out_h);

  // Horizontal pass into in_h rows of out_w, then blend row pairs.
  std::vector<T> rows(in_h * out_w);
  for (std::size_t y = 0; y < in_h; ++y) {
    const T* src = in.data() + y * in_w;
    T* dst = rows.data() + y * out_w;
    for (std::size_t j = 0; j < out_w; ++j) {
      const T f = static_cast<T>(xs.frac[j]);
      const T a = src[xs.lo[j]];
      dst[j] = a + f * (src[xs.hi[j]] - a);
    }
  }
  for (std::size_t i = 0; i < out_h; ++i) {
    const T f = static_cast<T>(ys.frac[i]);
    simd::lerp(out.subspan(i * out_w, out_w),
               std::span<const T>(rows.data() + ys.lo[i] * out_w, out_w),
               std::span<const T>(rows.data() + ys.hi[i] * out_w, out_w), f);
  }
}

template <class T>
void bilinear_upscale_adjoint(std::span<const T> grad_out, std::size_t out_h, std::size_t out_w,
                              std::size_t in_h, std::size_t in_w, std::span<T> grad_in) {
  if (grad_in.size() != in_h * in_w || grad_out.size() != out_h * out_w) {
    fail(ErrorKind::shape, "bilinear buffer sizes disagree with extents");
  }
  const AxisSampling xs = axis_sampling(in_w, out_w);
  const AxisSampling ys = axis_sampling(in_h, out_h);

  std::vector<T> rows(in_h * out_w, T(0));
  for (std::size_t i = 0; i < out_h; ++i) {
    const T f = static_cast<T>(ys.frac[i]);
    const auto g = grad_out.subspan(i * out_w, out_w);
    simd::axpy(std::span<T>(rows.data() + ys.lo[i] * out_w, out_w), g, T(1) - f);
    if (f != T(0)) simd::axpy(std::span<T>(rows.data() + ys.hi[i] * out_w, out_w), g, f);
  }
  std::fill(grad_in.begin(), grad_in.end(), T(0));
  for (std::size_t y = 0; y < in_h; ++y) {
    const T* src = rows.data() + y * out_w;
    T* dst = grad_in.data() + y * in_w;
    for (std::size_t j = 0; j < out_w; ++j) {
      const T f = static_cast<T>(xs.frac[j]);
      dst[xs.lo[j]] += (T(1) - f) * src[j];
      dst[xs.hi[j]] += f * src[j];
    }
  }
}

#define PARTPROBE_INSTANTIATE(T)                                                               \
  template void correlate_same<T>(const ActivationView<T>&, std::span<const T>,               \
                                  const KernelShape&, T, std::span<T>);                        \
  template void correlate_same_backward<T>(const ActivationView<T>&, std::span<const T>,      \
                                           const KernelShape&, std::span<T>, T&);              \
  template void bilinear_upscale<T>(std::span<const T>, std::size_t, std::size_t, std::size_t, \
                                    std::size_t, std::span<T>);                                \
  template void bilinear_upscale_adjoint<T>(std::span<const T>, std::size_t, std::size_t,     \
                                            std::size_t, std::size_t, std::span<T>);

PARTPROBE_INSTANTIATE(float)
PARTPROBE_INSTANTIATE(double)

#undef PARTPROBE_INSTANTIATE

}  // namespace partprobe::pipeline
