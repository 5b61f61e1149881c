#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "partprobe/dataset.hpp"
#include "partprobe/model.hpp"
#include "partprobe/plane.hpp"
#include "partprobe/tensor.hpp"

namespace partprobe {

struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_area = 0;

  IouCounts& operator+=(const IouCounts& o) noexcept {
    intersection += o.intersection;
    union_area += o.union_area;
    return *this;
  }
  /// 0 for an empty union.
  double ratio() const noexcept {
    return union_area ? static_cast<double>(intersection) / static_cast<double>(union_area) : 0.0;
  }
};

/// Pixel counts of gt AND (pred > 0.5) and gt OR (pred > 0.5).
IouCounts iou_counts(const BinaryMask& gt, const ProbabilityMap& pred);

/// Total intersection over total union across the whole list.
double set_iou(std::span<const BinaryMask> gts, std::span<const ProbabilityMap> preds);

struct EvalReport {
  std::string net;
  std::string layer;
  std::string concept_name;
  std::string size_category = "all";
  std::string kernel_setting;
  std::string fold;
  std::vector<double> batch_iou;
  double mean = 0;
  double stddev = 0;  // population
  double pooled = 0;  // set IoU over the whole dataset
};

/// Consecutive batches in dataset order; mean and spread of the per-batch
/// set IoU. Degenerate error on an empty dataset.
EvalReport evaluate(const ConceptModel& m, const Dataset& dataset, const ActivationCache& cache,
                    std::size_t batch_size);

/// Clamped to [-1, 1]. Incomparable error for different lengths, degenerate
/// error for a zero vector.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct SimilarityMatrix {
  std::vector<std::string> concepts;
  std::vector<double> values;  // row-major concepts x concepts

  double at(std::size_t i, std::size_t j) const { return values[i * concepts.size() + j]; }
};

/// Mean cosine similarity over all cross-fold pairs; same-concept entries
/// skip self pairs (and fall back to 1 with a single fold).
SimilarityMatrix similarity_matrix(
    std::span<const std::pair<std::string, std::vector<ConceptModel>>> models);

inline constexpr double kRidgeDamping = 1e-8;

struct LeastSquaresFit {
  std::vector<double> coefficients;
  double fit_cosine = 0;
  bool degenerate = false;  // reconstruction vanished; fit_cosine reported as 0
  std::vector<double> residual;
};

/// Ridge-damped normal equations for min |target - sum c_i basis_i|.
LeastSquaresFit least_squares_fit(std::span<const float> target,
                                  std::span<const std::vector<float>> basis);

double mean_of(std::span<const double> values);
double population_stddev(std::span<const double> values);

}  // namespace partprobe
