#include "partprobe/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "partprobe/error.hpp"

namespace partprobe {
namespace {

struct LinkName {
  LinkKind kind;
  std::string_view name;
};

constexpr std::array<LinkName, 20> kLinkNames{{
    {LinkKind::lower_leg, "lower_leg"},
    {LinkKind::upper_leg, "upper_leg"},
    {LinkKind::lower_arm, "lower_arm"},
    {LinkKind::upper_arm, "upper_arm"},
    {LinkKind::hip_to_shoulder, "hip_to_shoulder"},
    {LinkKind::shoulder_to_eye, "shoulder_to_eye"},
    {LinkKind::shoulder_to_ear, "shoulder_to_ear"},
    {LinkKind::shoulder_to_nose, "shoulder_to_nose"},
    {LinkKind::shoulder_width, "shoulder_width"},
    {LinkKind::ear_to_opposite_ear, "ear_to_opposite_ear"},
    {LinkKind::eye_to_eye, "eye_to_eye"},
    {LinkKind::ear_to_eye, "ear_to_eye"},
    {LinkKind::ear_to_nose, "ear_to_nose"},
    {LinkKind::leg, "leg"},
    {LinkKind::arm, "arm"},
    {LinkKind::body_height, "body_height"},
    {LinkKind::head_height, "head_height"},
    {LinkKind::head_width, "head_width"},
    {LinkKind::head_depth, "head_depth"},
    {LinkKind::bbox, "bbox"},
}};

// Total-height relations (slope, offset in meters); offsets are the long bone
// regressions averaged over genders.
constexpr std::array<RelationModel, 9> kRelations{{
    {LinkKind::bbox, 1.0, 0.0},
    {LinkKind::body_height, 1.1, 0.0},
    {LinkKind::hip_to_shoulder, 2.4, 0.0},
    {LinkKind::head_height, 7.0, 0.0},
    {LinkKind::leg, 1.485, 0.433},
    {LinkKind::upper_leg, 2.77, 0.405},
    {LinkKind::lower_leg, 3.075, 0.501},
    {LinkKind::upper_arm, 3.72, 0.449},
    {LinkKind::lower_arm, 4.46, 0.569},
}};

constexpr std::array<LinkKind, 5> kSidedWithRelation{
    LinkKind::hip_to_shoulder, LinkKind::upper_leg, LinkKind::lower_leg,
    LinkKind::upper_arm, LinkKind::lower_arm};

Joint pick(Side side, Joint left, Joint right) { return side == Side::left ? left : right; }

std::pair<Joint, Joint> endpoints(LinkKind kind, Side s) {
  using J = Joint;
  switch (kind) {
    case LinkKind::lower_leg:
      return {pick(s, J::left_knee, J::right_knee), pick(s, J::left_ankle, J::right_ankle)};
    case LinkKind::upper_leg:
      return {pick(s, J::left_hip, J::right_hip), pick(s, J::left_knee, J::right_knee)};
    case LinkKind::lower_arm:
      return {pick(s, J::left_elbow, J::right_elbow), pick(s, J::left_wrist, J::right_wrist)};
    case LinkKind::upper_arm:
      return {pick(s, J::left_shoulder, J::right_shoulder), pick(s, J::left_elbow, J::right_elbow)};
    case LinkKind::hip_to_shoulder:
      return {pick(s, J::left_hip, J::right_hip), pick(s, J::left_shoulder, J::right_shoulder)};
    case LinkKind::shoulder_to_eye:
      return {pick(s, J::left_shoulder, J::right_shoulder), pick(s, J::left_eye, J::right_eye)};
    case LinkKind::shoulder_to_ear:
      return {pick(s, J::left_shoulder, J::right_shoulder), pick(s, J::left_ear, J::right_ear)};
    case LinkKind::shoulder_to_nose:
      return {pick(s, J::left_shoulder, J::right_shoulder), J::nose};
    case LinkKind::ear_to_eye:
      return {pick(s, J::left_ear, J::right_ear), pick(s, J::left_eye, J::right_eye)};
    case LinkKind::ear_to_nose:
      return {pick(s, J::left_ear, J::right_ear), J::nose};
    case LinkKind::shoulder_width:
      return {J::left_shoulder, J::right_shoulder};
    case LinkKind::ear_to_opposite_ear:
      return {J::left_ear, J::right_ear};
    case LinkKind::eye_to_eye:
      return {J::left_eye, J::right_eye};
    default:
      fail(ErrorKind::usage, std::string(to_string(kind)) + " is not a keypoint link");
  }
}

std::optional<double> add(std::optional<double> a, std::optional<double> b) {
  if (a && b) return *a + *b;
  return std::nullopt;
}

std::optional<double> max_of(std::optional<double> a, std::optional<double> b) {
  if (a && b) return std::max(*a, *b);
  return a ? a : b;
}

std::optional<double> scaled(double factor, std::optional<double> v) {
  if (v) return factor * *v;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(LinkKind kind) noexcept {
  for (const auto& entry : kLinkNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

LinkKind parse_link_kind(std::string_view name) {
  for (const auto& entry : kLinkNames) {
    if (entry.name == name) return entry.kind;
  }
  fail(ErrorKind::usage, "unknown link kind '" + std::string(name) + "'");
}

bool is_measured(LinkKind kind) noexcept {
  return static_cast<int>(kind) <= static_cast<int>(LinkKind::ear_to_nose);
}

bool is_sided(LinkKind kind) noexcept {
  return is_measured(kind) && kind != LinkKind::shoulder_width &&
         kind != LinkKind::ear_to_opposite_ear && kind != LinkKind::eye_to_eye;
}

std::optional<double> link_length(const PersonAnnotation& ann, LinkKind kind, Side side) {
  const auto [a, b] = endpoints(kind, side);
  const Keypoint& p = ann[a];
  const Keypoint& q = ann[b];
  if (!p.present() || !q.present()) return std::nullopt;
  return std::hypot(q.x - p.x, q.y - p.y);
}

std::map<LinkKind, double> derived_lengths(const PersonAnnotation& ann) {
  std::optional<double> leg, arm, body, head_depth;
  for (Side s : {Side::left, Side::right}) {
    const auto leg_s = add(link_length(ann, LinkKind::lower_leg, s),
                           link_length(ann, LinkKind::upper_leg, s));
    leg = max_of(leg, leg_s);
    arm = max_of(arm, add(link_length(ann, LinkKind::lower_arm, s),
                          link_length(ann, LinkKind::upper_arm, s)));

    auto neck_to_head = max_of(link_length(ann, LinkKind::shoulder_to_eye, s),
                               link_length(ann, LinkKind::shoulder_to_ear, s));
    neck_to_head = max_of(neck_to_head, link_length(ann, LinkKind::shoulder_to_nose, s));
    body = max_of(body, add(add(leg_s, link_length(ann, LinkKind::hip_to_shoulder, s)),
                            neck_to_head));

    head_depth = max_of(head_depth, scaled(2.0, link_length(ann, LinkKind::ear_to_eye, s)));
    head_depth = max_of(head_depth, scaled(7.0 / 4.0, link_length(ann, LinkKind::ear_to_nose, s)));
  }
  body = max_of(body, add(arm, link_length(ann, LinkKind::shoulder_width)));

  const auto head_width = max_of(link_length(ann, LinkKind::ear_to_opposite_ear),
                                 scaled(2.5, link_length(ann, LinkKind::eye_to_eye)));
  const auto head_height = max_of(scaled(1.1, head_width), scaled(8.0 / 7.0, head_depth));

  std::map<LinkKind, double> out;
  const std::pair<LinkKind, std::optional<double>> entries[] = {
      {LinkKind::leg, leg},
      {LinkKind::arm, arm},
      {LinkKind::body_height, body},
      {LinkKind::head_width, head_width},
      {LinkKind::head_depth, head_depth},
      {LinkKind::head_height, head_height},
  };
  for (const auto& [kind, value] : entries) {
    if (value) out.emplace(kind, *value);
  }
  return out;
}

std::optional<RelationModel> relation_for(LinkKind kind) noexcept {
  for (const auto& r : kRelations) {
    if (r.kind == kind) return r;
  }
  return std::nullopt;
}

double height_from_link(LinkKind kind, double length_px, double h_standard) {
  const auto relation = relation_for(kind);
  if (!relation) {
    fail(ErrorKind::usage, std::string(to_string(kind)) + " has no total-height relation");
  }
  if (!(length_px > 0)) fail(ErrorKind::domain, "link length must be positive");
  if (!(h_standard > relation->offset_m)) {
    fail(ErrorKind::domain, "standard height must exceed the relation offset");
  }
  if (relation->offset_m == 0.0) return relation->slope * length_px;
  return relation->slope * length_px * h_standard / (h_standard - relation->offset_m);
}

SizeEstimate estimate_body_height(const PersonAnnotation& ann, double h_standard) {
  std::optional<double> best;
  auto consider = [&](LinkKind kind, std::optional<double> length) {
    if (length && *length > 0) best = max_of(best, height_from_link(kind, *length, h_standard));
  };

  for (LinkKind kind : kSidedWithRelation) {
    consider(kind, link_length(ann, kind, Side::left));
    consider(kind, link_length(ann, kind, Side::right));
  }
  for (const auto& [kind, length] : derived_lengths(ann)) {
    if (relation_for(kind)) consider(kind, length);
  }
  if (ann.bbox) consider(LinkKind::bbox, std::max(ann.bbox->width, ann.bbox->height));

  SizeEstimate est;
  est.height_px = best;
  return est;
}

SizeCategory category_for_relative(double relative) noexcept {
  for (const auto& range : kCategoryRanges) {
    if (relative >= range.lo && relative < range.hi) return range.category;
  }
  return SizeCategory::out_of_range;
}

SizeCategory categorize(std::optional<double> height_px, double reference_side_px) {
  if (!(reference_side_px > 0)) fail(ErrorKind::domain, "reference side must be positive");
  if (!height_px) return SizeCategory::unknown;
  return category_for_relative(*height_px / reference_side_px);
}

SizeEstimate categorize(SizeEstimate estimate, double reference_side_px) {
  estimate.category = categorize(estimate.height_px, reference_side_px);
  estimate.relative = estimate.height_px ? *estimate.height_px / reference_side_px : 0.0;
  return estimate;
}

std::string_view to_string(SizeCategory category) noexcept {
  switch (category) {
    case SizeCategory::far: return "far";
    case SizeCategory::middle: return "middle";
    case SizeCategory::close: return "close";
    case SizeCategory::very_close: return "very_close";
    case SizeCategory::out_of_range: return "out_of_range";
    case SizeCategory::unknown: return "unknown";
  }
  return "unknown";
}

SizeCategory parse_size_category(std::string_view name) {
  for (SizeCategory c : {SizeCategory::far, SizeCategory::middle, SizeCategory::close,
                         SizeCategory::very_close, SizeCategory::out_of_range,
                         SizeCategory::unknown}) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorKind::usage, "unknown size category '" + std::string(name) + "'");
}

}  // namespace partprobe
