#include "partprobe/simd.hpp"

namespace partprobe::simd {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) { return ref::dot(a, b, n); }
void axpy_scalar(float* y, const float* x, float a, std::size_t n) { ref::axpy(y, x, a, n); }
float sum_scalar(const float* x, std::size_t n) { return ref::sum(x, n); }
void lerp_scalar(float* out, const float* a, const float* b, float t, std::size_t n) {
  ref::lerp(out, a, b, t, n);
}
void sigmoid_scalar(float* out, const float* in, std::size_t n) { ref::sigmoid(out, in, n); }

constexpr KernelTable kScalar{
    "scalar",        dot_scalar,     axpy_scalar,       sum_scalar, lerp_scalar,
    sigmoid_scalar, ref::encode_bf16, ref::decode_bf16,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace partprobe::simd
