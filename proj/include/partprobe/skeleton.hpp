#pragma once

// Body height estimation from 2D keypoint links and size categorization.
//
// Every link length l' (pixels) is related to the body height through a
// linear anthropometric model h = s*l + c (c in meters). Scaled to the image
// this gives f*h = s * l' * h / (h - c) for an assumed standard height h.
// Whenever several formulas estimate the same quantity the largest value is
// kept, since 2D projection can only shorten a link.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace partprobe {

enum class Visibility { absent = 0, occluded = 1, visible = 2 };

struct Keypoint {
  double x = 0;
  double y = 0;
  Visibility visibility = Visibility::absent;

  bool present() const noexcept { return visibility != Visibility::absent; }
};

/// COCO keypoint order.
enum class Joint {
  nose, left_eye, right_eye, left_ear, right_ear, left_shoulder, right_shoulder,
  left_elbow, right_elbow, left_wrist, right_wrist, left_hip, right_hip,
  left_knee, right_knee, left_ankle, right_ankle,
};
inline constexpr std::size_t kJointCount = 17;

struct BoundingBox {
  double x = 0, y = 0, width = 0, height = 0;
};

struct PersonAnnotation {
  std::string id;
  std::string image_id;
  double image_width = 0;
  double image_height = 0;
  std::array<Keypoint, kJointCount> keypoints{};
  std::optional<BoundingBox> bbox;

  const Keypoint& operator[](Joint j) const { return keypoints[static_cast<std::size_t>(j)]; }
  Keypoint& operator[](Joint j) { return keypoints[static_cast<std::size_t>(j)]; }
};

enum class LinkKind {
  // measured between two keypoints
  lower_leg, upper_leg, lower_arm, upper_arm, hip_to_shoulder,
  shoulder_to_eye, shoulder_to_ear, shoulder_to_nose,
  shoulder_width, ear_to_opposite_ear, eye_to_eye, ear_to_eye, ear_to_nose,
  // composites
  leg, arm, body_height, head_height, head_width, head_depth,
  bbox,
};

enum class Side { left, right };

std::string_view to_string(LinkKind kind) noexcept;
/// Usage error for unknown names.
LinkKind parse_link_kind(std::string_view name);

bool is_measured(LinkKind kind) noexcept;
/// Sided links connect two keypoints of the same body side (nose counts as
/// belonging to either side).
bool is_sided(LinkKind kind) noexcept;

/// Euclidean distance between the link's endpoints, or nullopt if either is
/// absent. `side` is ignored for unsided links. Usage error for composite
/// kinds.
std::optional<double> link_length(const PersonAnnotation& ann, LinkKind kind,
                                  Side side = Side::left);

/// Every composite length derivable from the annotation, plus the measured
/// links (max over sides) they were built from.
std::map<LinkKind, double> derived_lengths(const PersonAnnotation& ann);

struct RelationModel {
  LinkKind kind;
  double slope;
  double offset_m;
};

/// Relations of the total-height table; nullopt for links that only feed
/// composites.
std::optional<RelationModel> relation_for(LinkKind kind) noexcept;

inline constexpr double kStandardHeightM = 1.7;

/// s * length * h / (h - c). Domain error for length <= 0 or h <= c, usage
/// error for links without a total-height relation.
double height_from_link(LinkKind kind, double length_px, double h_standard = kStandardHeightM);

enum class SizeCategory { far, middle, close, very_close, out_of_range, unknown };

std::string_view to_string(SizeCategory category) noexcept;
SizeCategory parse_size_category(std::string_view name);

struct SizeEstimate {
  std::optional<double> height_px;
  double relative = 0;  // meaningful only once categorized
  SizeCategory category = SizeCategory::unknown;
};

/// Max over all link, composite and bounding box candidates; height unknown
/// when no candidate exists.
SizeEstimate estimate_body_height(const PersonAnnotation& ann,
                                  double h_standard = kStandardHeightM);

/// Half-open bins: far [0.2,0.38), middle [0.38,0.71), close [0.71,1.33),
/// very close [1.33,2.5); anything else is out of range.
SizeCategory category_for_relative(double relative) noexcept;

/// Domain error when reference_side_px <= 0.
SizeCategory categorize(std::optional<double> height_px, double reference_side_px);
SizeEstimate categorize(SizeEstimate estimate, double reference_side_px);

struct CategoryRange {
  SizeCategory category;
  double lo;
  double hi;
};
inline constexpr std::array<CategoryRange, 4> kCategoryRanges{{
    {SizeCategory::far, 0.2, 0.38},
    {SizeCategory::middle, 0.38, 0.71},
    {SizeCategory::close, 0.71, 1.33},
    {SizeCategory::very_close, 1.33, 2.5},
}};

}  // namespace partprobe
