#pragma once

#include <filesystem>
#include <string>

#include "partprobe/concept.hpp"
#include "partprobe/plane.hpp"
#include "partprobe/skeleton.hpp"

namespace partprobe {

/// Zero-pad to a centered square, then resize to target_side.
struct LetterboxTransform {
  double scale = 1;
  double pad_x = 0;  // pre-scale pixels
  double pad_y = 0;
  int target_side = 0;

  double map_x(double x) const noexcept { return (x + pad_x) * scale; }
  double map_y(double y) const noexcept { return (y + pad_y) * scale; }
};

/// Domain error unless all arguments are positive.
LetterboxTransform letterbox(double orig_w, double orig_h, int target_side);

/// Relative stroke width: 0.025 of the (letterboxed) body height when known,
/// otherwise of the target side.
inline constexpr double kStrokeFraction = 0.025;

double stroke_width(const LetterboxTransform& t, const SizeEstimate& size);

/// Limbs (leg, arm) are drawn as capsules of diameter w around each link,
/// points (foot, hand, eye) as disks of diameter w; both body sides go into
/// the same mask. A pixel is set iff its center lies within w/2 of the
/// stroke.
BinaryMask rasterize(const PersonAnnotation& ann, Concept part, const LetterboxTransform& t,
                     const SizeEstimate& size);

/// ORs one person's strokes into an existing target_side x target_side mask.
void rasterize_into(BinaryMask& mask, const PersonAnnotation& ann, Concept part,
                    const LetterboxTransform& t, const SizeEstimate& size);

/// True if the annotation has at least one stroke for the concept.
bool has_concept(const PersonAnnotation& ann, Concept part);

/// Binary P5, maxval 255 (0 background, 255 concept).
void write_pgm(const std::filesystem::path& path, const BinaryMask& mask);
/// Any nonzero sample reads as 1. Format error on anything but binary PGM.
BinaryMask read_pgm(const std::filesystem::path& path);

std::string mask_filename(const std::string& image_id, Concept part);

}  // namespace partprobe
