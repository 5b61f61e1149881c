#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "partprobe/dataset.hpp"
#include "partprobe/losses.hpp"
#include "partprobe/metrics.hpp"
#include "partprobe/model.hpp"
#include "partprobe/optimizer.hpp"
#include "partprobe/tensor.hpp"

namespace partprobe {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  LossKind loss = LossKind::dice;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 5;
  std::uint64_t seed = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Dataset-wide positive pixel fraction for the globally weighted BCE;
  /// computed by train() when left empty.
  std::optional<double> global_pos_frac;

  /// Usage error for non-positive rates, sizes or epochs, or even kernels.
  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

template <class T>
struct GradientResult {
  T loss = 0;
  std::vector<T> dkernel;
  T dbias = 0;
};

struct BatchItem {
  const Tensor* activation = nullptr;
  const BinaryMask* mask = nullptr;
};

/// Batch-mean loss and its analytic gradient through sigmoid, bilinear
/// upscaling and the same-padded correlation.
GradientResult<float> loss_and_grads(const ConceptModel& m, std::span<const BatchItem> batch,
                                     const TrainConfig& cfg);

/// The same computation carried out in double precision (verification).
GradientResult<double> loss_and_grads_f64(const ConceptModel& m, std::span<const BatchItem> batch,
                                          const TrainConfig& cfg);

/// Same as above with double-precision parameters; used by finite
/// difference checks that perturb weights below f32 resolution.
GradientResult<double> loss_and_grads_f64(const pipeline::KernelShape& shape,
                                          std::span<const double> kernel, double bias,
                                          std::span<const BatchItem> batch, const TrainConfig& cfg);

/// Kernel drawn from the seeded uniform(-1/sqrt(n), 1/sqrt(n)), n = C*kh*kw;
/// zero bias.
ConceptModel initial_model(std::size_t channels, const TrainConfig& cfg);

struct TrainResult {
  ConceptModel model;
  std::vector<double> epoch_loss;
};

/// Shuffled mini-batch training for cfg.max_epochs epochs. Activations are
/// read from the cache one batch at a time. Numeric error if the loss turns
/// non-finite.
TrainResult train(const Dataset& dataset, const ActivationCache& cache, const TrainConfig& cfg,
                  const std::string& concept_name = {});

/// Seeded permutation cut into k contiguous parts; the first n % k parts get
/// one extra element. Usage error when n < k or k < 2.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

struct FoldOutcome {
  std::size_t fold = 0;
  ConceptModel model;
  std::vector<double> epoch_loss;
  std::vector<std::size_t> validation_indices;
  EvalReport validation;
};

struct CrossValidationResult {
  std::vector<FoldOutcome> folds;
  double mean_iou = 0;
  double stddev_iou = 0;
};

/// k-fold cross-validation: fold i validates on part i and trains on the
/// rest. Folds run concurrently when `parallel`; results do not depend on it.
CrossValidationResult cross_validate(const Dataset& dataset, const ActivationCache& cache,
                                     const TrainConfig& cfg, std::size_t k = 5,
                                     const std::string& concept_name = {}, bool parallel = true);

/// Fraction of positive mask pixels over the dataset.
double positive_fraction(const Dataset& dataset);

}  // namespace partprobe
