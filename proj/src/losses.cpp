#include "partprobe/losses.hpp"

#include <cmath>
#include <string>

#include "partprobe/error.hpp"
#include "partprobe/simd.hpp"

namespace partprobe {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::dice: return "dice";
    case LossKind::bce_batch_weighted: return "bce_batch_weighted";
    case LossKind::bce_global_weighted: return "bce_global_weighted";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::dice, LossKind::bce_batch_weighted, LossKind::bce_global_weighted}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::usage, "unknown loss '" + std::string(name) + "'");
}

template <class T>
LossValue<T> dice_loss(std::span<const T> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) fail(ErrorKind::shape, "dice: prediction and mask sizes differ");
  T inter = 0, gt_sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i]) {
      inter += pred[i];
      gt_sum += T(1);
    }
  }
  const T pred_sum = simd::sum(pred);
  const T eps = static_cast<T>(kDiceSmoothing);
  const T num = T(2) * inter + eps;
  const T den = gt_sum + pred_sum + eps;

  LossValue<T> out;
  out.loss = T(1) - num / den;
  out.grad.resize(pred.size());
  const T den_sq = den * den;
  const T grad_pos = -(T(2) * den - num) / den_sq;
  const T grad_neg = num / den_sq;
  for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] = gt[i] ? grad_pos : grad_neg;
  return out;
}

template <class T>
BatchLossValue<T> weighted_bce_loss(std::span<const std::span<const T>> preds,
                                    std::span<const std::span<const std::uint8_t>> gts,
                                    BceWeighting weighting, std::optional<double> global_pos_frac) {
  if (preds.size() != gts.size()) fail(ErrorKind::shape, "bce: batch sizes differ");
  std::size_t total = 0, positives = 0;
  for (std::size_t b = 0; b < preds.size(); ++b) {
    if (preds[b].size() != gts[b].size()) fail(ErrorKind::shape, "bce: prediction and mask sizes differ");
    total += gts[b].size();
    for (std::uint8_t g : gts[b]) positives += g ? 1 : 0;
  }

  double p = 0;
  if (weighting == BceWeighting::global) {
    if (!global_pos_frac || !(*global_pos_frac > 0 && *global_pos_frac < 1)) {
      fail(ErrorKind::usage, "globally weighted BCE needs a positive fraction in (0, 1)");
    }
    p = *global_pos_frac;
  } else {
    p = total ? static_cast<double>(positives) / static_cast<double>(total) : 0.0;
  }
  const T alpha = static_cast<T>(1 - p);
  const T beta = static_cast<T>(p);
  const T clamp = static_cast<T>(kLogClamp);
  const T inv_n = total ? T(1) / static_cast<T>(total) : T(0);

  BatchLossValue<T> out;
  out.grads.resize(preds.size());
  T acc = 0;
  for (std::size_t b = 0; b < preds.size(); ++b) {
    const auto pred = preds[b];
    const auto gt = gts[b];
    auto& grad = out.grads[b];
    grad.assign(pred.size(), T(0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const T q = pred[i];
      if (gt[i]) {
        acc += alpha * std::log(std::max(q, clamp));
        if (q > clamp) grad[i] = -alpha * inv_n / q;
      } else {
        const T r = T(1) - q;
        acc += beta * std::log(std::max(r, clamp));
        if (r > clamp) grad[i] = beta * inv_n / r;
      }
    }
  }
  out.loss = -acc * inv_n;
  return out;
}

template <class T>
BatchLossValue<T> batch_loss(LossKind kind, std::span<const std::span<const T>> preds,
                             std::span<const std::span<const std::uint8_t>> gts,
                             std::optional<double> global_pos_frac) {
  switch (kind) {
    case LossKind::bce_batch_weighted:
      return weighted_bce_loss<T>(preds, gts, BceWeighting::batch);
    case LossKind::bce_global_weighted:
      return weighted_bce_loss<T>(preds, gts, BceWeighting::global, global_pos_frac);
    case LossKind::dice:
      break;
  }
  if (preds.size() != gts.size()) fail(ErrorKind::shape, "dice: batch sizes differ");
  BatchLossValue<T> out;
  if (preds.empty()) return out;
  const T scale = T(1) / static_cast<T>(preds.size());
  for (std::size_t b = 0; b < preds.size(); ++b) {
    auto single = dice_loss<T>(preds[b], gts[b]);
    out.loss += single.loss * scale;
    for (T& g : single.grad) g *= scale;
    out.grads.push_back(std::move(single.grad));
  }
  return out;
}

template LossValue<float> dice_loss<float>(std::span<const float>, std::span<const std::uint8_t>);
template LossValue<double> dice_loss<double>(std::span<const double>, std::span<const std::uint8_t>);
template BatchLossValue<float> weighted_bce_loss<float>(std::span<const std::span<const float>>,
                                                        std::span<const std::span<const std::uint8_t>>,
                                                        BceWeighting, std::optional<double>);
template BatchLossValue<double> weighted_bce_loss<double>(
    std::span<const std::span<const double>>, std::span<const std::span<const std::uint8_t>>,
    BceWeighting, std::optional<double>);
template BatchLossValue<float> batch_loss<float>(LossKind, std::span<const std::span<const float>>,
                                                 std::span<const std::span<const std::uint8_t>>,
                                                 std::optional<double>);
template BatchLossValue<double> batch_loss<double>(LossKind,
                                                   std::span<const std::span<const double>>,
                                                   std::span<const std::span<const std::uint8_t>>,
                                                   std::optional<double>);

}  // namespace partprobe
