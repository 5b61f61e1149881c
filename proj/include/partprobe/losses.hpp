#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace partprobe {

enum class LossKind { dice, bce_batch_weighted, bce_global_weighted };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);

/// Additive smoothing of the Dice ratio; makes empty masks well defined.
inline constexpr double kDiceSmoothing = 1e-6;
/// Lower clamp for log arguments in the weighted BCE.
inline constexpr double kLogClamp = 1e-7;

template <class T>
struct LossValue {
  T loss = 0;
  std::vector<T> grad;  // d loss / d prediction
};

template <class T>
struct BatchLossValue {
  T loss = 0;
  std::vector<std::vector<T>> grads;  // one per image
};

/// 1 - (2 sum(gt*pred) + eps) / (sum(gt) + sum(pred) + eps) for one image.
template <class T>
LossValue<T> dice_loss(std::span<const T> pred, std::span<const std::uint8_t> gt);

enum class BceWeighting { batch, global };

/// -mean(alpha*gt*log(pred) + beta*(1-gt)*log(1-pred)) over every pixel of
/// the batch, alpha = 1 - p and beta = p for the positive fraction p (of the
/// batch, or the supplied dataset-wide value). Usage error when global
/// weighting is requested without a fraction in (0, 1).
template <class T>
BatchLossValue<T> weighted_bce_loss(std::span<const std::span<const T>> preds,
                                    std::span<const std::span<const std::uint8_t>> gts,
                                    BceWeighting weighting,
                                    std::optional<double> global_pos_frac = std::nullopt);

/// Dice averaged over the batch, or the weighted BCE.
template <class T>
BatchLossValue<T> batch_loss(LossKind kind, std::span<const std::span<const T>> preds,
                             std::span<const std::span<const std::uint8_t>> gts,
                             std::optional<double> global_pos_frac = std::nullopt);

}  // namespace partprobe
