#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "partprobe/concept.hpp"
#include "partprobe/pipeline.hpp"
#include "partprobe/plane.hpp"
#include "partprobe/tensor.hpp"

namespace partprobe {

/// One-filter convolution (C x kh x kw kernel plus bias) on a layer's
/// activation map. The flattened kernel is the concept embedding vector.
struct ConceptModel {
  std::string concept_name;
  std::string layer;
  std::size_t channels = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::vector<float> kernel;  // C-major: [c][dy][dx]
  float bias = 0;

  pipeline::KernelShape shape() const noexcept { return {channels, kh, kw}; }
  std::span<const float> embedding() const noexcept { return kernel; }

  /// Shape error unless kh, kw are odd and the kernel holds C*kh*kw values.
  void validate() const;

  friend bool operator==(const ConceptModel&, const ConceptModel&) = default;
};

/// Pre-sigmoid logits at activation resolution (H x W).
Plane<float> logits(const ConceptModel& m, const Tensor& act);

/// Convolution, bilinear upscale to out_h x out_w, sigmoid. Shape error on a
/// channel mismatch.
ProbabilityMap forward(const ConceptModel& m, const Tensor& act, std::size_t out_h,
                       std::size_t out_w);
inline ProbabilityMap forward(const ConceptModel& m, const Tensor& act, std::size_t out_side) {
  return forward(m, act, out_side, out_side);
}

/// Half-pixel-center bilinear resampling with border clamping.
Plane<float> bilinear_upscale(const Plane<float>& map, std::size_t out_h, std::size_t out_w);

/// 1 where the probability is strictly above 0.5.
BinaryMask binarize(const ProbabilityMap& prob);

/// Mean of L2-normalized models (bias divided by the same norm). Shape
/// error for mixed shapes, degenerate error for a zero kernel.
ConceptModel mean_model(std::span<const ConceptModel> models);

/// Odd kernel extents (kh, kw) covering the concept's typical share of the
/// person extent at the layer's resolution. Domain error for stride < 1 or a
/// non-positive person size.
std::pair<std::size_t, std::size_t> adaptive_kernel(double mean_person_px, Concept part,
                                                    double stride);

/// Smallest odd integer >= value (and >= 1).
std::size_t odd_ceiling(double value);

/// Writes `<name>.json` (concept, layer, channels, kh, kw, bias, weights)
/// and `<name>.wts` (little-endian f32 kernel, C-major). Returns the sidecar
/// path.
std::filesystem::path save_model(const std::filesystem::path& directory, const std::string& name,
                                 const ConceptModel& model);
ConceptModel load_model(const std::filesystem::path& sidecar);

}  // namespace partprobe
