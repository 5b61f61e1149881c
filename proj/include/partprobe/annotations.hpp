#pragma once

// JSON Lines person annotations: one object per line with `image_id`,
// `image_width`, `image_height`, `keypoints` (17 x [x, y, v], nested or flat
// COCO style), optional `bbox` [x, y, w, h] and optional `id`.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "partprobe/skeleton.hpp"

namespace partprobe {

struct AnnotationSet {
  std::vector<PersonAnnotation> people;
  std::size_t skipped = 0;  // malformed lines
  std::vector<std::string> problems;
};

/// Format error on malformed records. `fallback_id` is used when the record
/// carries no `id`.
PersonAnnotation parse_annotation(std::string_view line, const std::string& fallback_id);

/// Skips (and counts) malformed lines instead of failing.
AnnotationSet read_annotations(std::istream& in);
AnnotationSet load_annotations(const std::filesystem::path& path);

std::string to_json_line(const PersonAnnotation& ann);

/// Non-absent keypoints may lie this fraction of the larger image side
/// outside the image before a record is rejected.
inline constexpr double kKeypointMargin = 0.1;

}  // namespace partprobe
