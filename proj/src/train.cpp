#include "partprobe/train.hpp"

#include <cmath>
#include <future>
#include <numbers>

#include "partprobe/error.hpp"
#include "partprobe/maskgen.hpp"
#include "partprobe/pipeline.hpp"
#include "partprobe/simd.hpp"

namespace partprobe {

BinaryMask LabeledSample::load_mask() const {
  if (mask) return *mask;
  if (mask_path.empty()) fail(ErrorKind::usage, "sample '" + id + "' has no mask");
  return read_pgm(mask_path);
}

double SeededRng::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) fail(ErrorKind::usage, "learning rate must be positive");
  if (batch_size < 1) fail(ErrorKind::usage, "batch size must be at least 1");
  if (max_epochs < 1) fail(ErrorKind::usage, "max epochs must be at least 1");
  if (kh % 2 == 0 || kw % 2 == 0) fail(ErrorKind::usage, "kernel extents must be odd");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0)) {
    fail(ErrorKind::usage, "invalid Adam hyperparameters");
  }
}

namespace {

template <class T>
GradientResult<T> compute_gradients(const pipeline::KernelShape& shape, std::span<const T> kernel,
                                    T bias, std::span<const BatchItem> batch,
                                    const TrainConfig& cfg) {
  if (batch.empty()) fail(ErrorKind::usage, "empty batch");
  if (kernel.size() != shape.size()) fail(ErrorKind::shape, "kernel size does not match its shape");

  struct Forward {
    std::vector<T> converted;  // activation copy for the f64 path
    pipeline::ActivationView<T> view;
    std::vector<T> prob;
    std::size_t out_h = 0, out_w = 0;
  };
  std::vector<Forward> fwd(batch.size());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Tensor& act = *batch[b].activation;
    const BinaryMask& gt = *batch[b].mask;
    if (act.rank() != 3) fail(ErrorKind::shape, "activation must be C x H x W");
    Forward& f = fwd[b];
    if constexpr (std::is_same_v<T, float>) {
      f.view = {act.data(), act.extent(0), act.extent(1), act.extent(2)};
    } else {
      f.converted.assign(act.data().begin(), act.data().end());
      f.view = {f.converted, act.extent(0), act.extent(1), act.extent(2)};
    }
    f.out_h = gt.height;
    f.out_w = gt.width;
    std::vector<T> z(f.view.height * f.view.width);
    pipeline::correlate_same<T>(f.view, kernel, shape, bias, z);
    f.prob.resize(f.out_h * f.out_w);
    pipeline::bilinear_upscale<T>(z, f.view.height, f.view.width, f.out_h, f.out_w, f.prob);
    simd::sigmoid(std::span<T>(f.prob), std::span<const T>(f.prob));
  }

  std::vector<std::span<const T>> preds;
  std::vector<std::span<const std::uint8_t>> gts;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    preds.emplace_back(fwd[b].prob);
    gts.emplace_back(batch[b].mask->data);
  }
  auto loss = batch_loss<T>(cfg.loss, preds, gts, cfg.global_pos_frac);

  GradientResult<T> out;
  out.loss = loss.loss;
  out.dkernel.assign(shape.size(), T(0));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Forward& f = fwd[b];
    std::vector<T>& g = loss.grads[b];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= f.prob[i] * (T(1) - f.prob[i]);
    std::vector<T> dz(f.view.height * f.view.width);
    pipeline::bilinear_upscale_adjoint<T>(g, f.out_h, f.out_w, f.view.height, f.view.width, dz);
    pipeline::correlate_same_backward<T>(f.view, dz, shape, out.dkernel, out.dbias);
  }
  return out;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorKind::numeric, std::string("non-finite ") + what);
}

}  // namespace

GradientResult<float> loss_and_grads(const ConceptModel& m, std::span<const BatchItem> batch,
                                     const TrainConfig& cfg) {
  m.validate();
  return compute_gradients<float>(m.shape(), m.kernel, m.bias, batch, cfg);
}

GradientResult<double> loss_and_grads_f64(const ConceptModel& m, std::span<const BatchItem> batch,
                                          const TrainConfig& cfg) {
  m.validate();
  const std::vector<double> kernel(m.kernel.begin(), m.kernel.end());
  return compute_gradients<double>(m.shape(), kernel, m.bias, batch, cfg);
}

GradientResult<double> loss_and_grads_f64(const pipeline::KernelShape& shape,
                                          std::span<const double> kernel, double bias,
                                          std::span<const BatchItem> batch,
                                          const TrainConfig& cfg) {
  return compute_gradients<double>(shape, kernel, bias, batch, cfg);
}

ConceptModel initial_model(std::size_t channels, const TrainConfig& cfg) {
  ConceptModel m;
  m.channels = channels;
  m.kh = cfg.kh;
  m.kw = cfg.kw;
  m.kernel.resize(channels * cfg.kh * cfg.kw);
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.kernel.size()));
  SeededRng rng(cfg.seed);
  for (float& w : m.kernel) w = static_cast<float>(rng.uniform(-bound, bound));
  m.bias = 0;
  return m;
}

double positive_fraction(const Dataset& dataset) {
  std::uint64_t positives = 0, total = 0;
  for (const LabeledSample& s : dataset) {
    const BinaryMask mask = s.load_mask();
    total += mask.data.size();
    for (std::uint8_t v : mask.data) positives += v ? 1 : 0;
  }
  return total ? static_cast<double>(positives) / static_cast<double>(total) : 0.0;
}

TrainResult train(const Dataset& dataset, const ActivationCache& cache, const TrainConfig& config,
                  const std::string& concept_name) {
  config.validate();
  if (dataset.empty()) fail(ErrorKind::usage, "cannot train on an empty dataset");
  TrainConfig cfg = config;
  if (cfg.loss == LossKind::bce_global_weighted && !cfg.global_pos_frac) {
    cfg.global_pos_frac = positive_fraction(dataset);
  }

  const CacheManifest& manifest = cache.manifest();
  TrainResult result;
  result.model = initial_model(manifest.channels, cfg);
  result.model.concept_name = concept_name;
  result.model.layer = manifest.layer;
  ConceptModel& model = result.model;

  std::vector<float> params(model.kernel.size() + 1);
  AdamState adam(params.size());
  // Separate stream from the initializer.
  SeededRng order_rng(cfg.seed ^ 0x5deece66dull);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::vector<std::size_t> expected_shape{manifest.channels, manifest.height, manifest.width};
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> acts;
      std::vector<BinaryMask> masks;
      acts.reserve(end - start);
      masks.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const LabeledSample& s = dataset[order[i]];
        acts.push_back(cache.read_sample(s.id));
        if (acts.back().shape() != expected_shape) {
          fail(ErrorKind::shape, "sample '" + s.id + "' does not match the cache shape");
        }
        masks.push_back(s.load_mask());
      }
      std::vector<BatchItem> batch(acts.size());
      for (std::size_t i = 0; i < acts.size(); ++i) batch[i] = {&acts[i], &masks[i]};

      const auto grads = loss_and_grads(model, batch, cfg);
      check_finite(grads.loss, "loss");
      std::vector<float> flat(grads.dkernel);
      flat.push_back(grads.dbias);
      for (float g : flat) check_finite(g, "gradient");

      std::copy(model.kernel.begin(), model.kernel.end(), params.begin());
      params.back() = model.bias;
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(adam, params, flat, cfg.adam());
      } else {
        sgd_step(params, flat, cfg.learning_rate);
      }
      for (float w : params) check_finite(w, "parameter");
      std::copy(params.begin(), params.end() - 1, model.kernel.begin());
      model.bias = params.back();

      loss_sum += grads.loss;
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::usage, "cross-validation needs at least 2 folds");
  if (n < k) {
    fail(ErrorKind::usage, "dataset of " + std::to_string(n) + " samples is smaller than " +
                               std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + len));
    pos += len;
  }
  return folds;
}

CrossValidationResult cross_validate(const Dataset& dataset, const ActivationCache& cache,
                                     const TrainConfig& cfg, std::size_t k,
                                     const std::string& concept_name, bool parallel) {
  cfg.validate();
  const auto folds = make_folds(dataset.size(), k, cfg.seed);

  auto run_fold = [&](std::size_t f) {
    Dataset train_set, val_set;
    std::vector<bool> is_val(dataset.size(), false);
    for (std::size_t i : folds[f]) is_val[i] = true;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      (is_val[i] ? val_set : train_set).push_back(dataset[i]);
    }
    FoldOutcome out;
    out.fold = f;
    auto trained = train(train_set, cache, cfg, concept_name);
    out.model = std::move(trained.model);
    out.epoch_loss = std::move(trained.epoch_loss);
    out.validation_indices = folds[f];
    out.validation = evaluate(out.model, val_set, cache, cfg.batch_size);
    out.validation.fold = std::to_string(f);
    return out;
  };

  CrossValidationResult result;
  if (parallel) {
    std::vector<std::future<FoldOutcome>> pending;
    for (std::size_t f = 0; f < k; ++f) pending.push_back(std::async(std::launch::async, run_fold, f));
    for (auto& p : pending) result.folds.push_back(p.get());
  } else {
    for (std::size_t f = 0; f < k; ++f) result.folds.push_back(run_fold(f));
  }

  std::vector<double> ious;
  for (const auto& f : result.folds) ious.push_back(f.validation.mean);
  result.mean_iou = mean_of(ious);
  result.stddev_iou = population_stddev(ious);
  return result;
}

}  // namespace partprobe
