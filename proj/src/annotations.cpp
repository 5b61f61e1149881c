#include "partprobe/annotations.hpp"

#include <fstream>
#include <istream>

#include <json.hpp>

#include "partprobe/error.hpp"

namespace partprobe {
namespace {

using nlohmann::json;

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(ErrorKind::format, "ids must be strings or integers");
}

Keypoint make_keypoint(double x, double y, int v) {
  if (v < 0 || v > 2) fail(ErrorKind::format, "keypoint visibility must be 0, 1 or 2");
  return Keypoint{x, y, static_cast<Visibility>(v)};
}

}  // namespace

PersonAnnotation parse_annotation(std::string_view line, const std::string& fallback_id) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("not JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::format, "record is not an object");

  PersonAnnotation ann;
  try {
    ann.image_id = id_string(doc.at("image_id"));
    ann.id = doc.contains("id") ? id_string(doc["id"]) : fallback_id;
    ann.image_width = doc.at("image_width").get<double>();
    ann.image_height = doc.at("image_height").get<double>();

    const json& kps = doc.at("keypoints");
    if (!kps.is_array()) fail(ErrorKind::format, "keypoints must be an array");
    if (kps.size() == kJointCount * 3 && !kps.front().is_array()) {
      for (std::size_t i = 0; i < kJointCount; ++i) {
        ann.keypoints[i] = make_keypoint(kps[3 * i].get<double>(), kps[3 * i + 1].get<double>(),
                                         kps[3 * i + 2].get<int>());
      }
    } else if (kps.size() == kJointCount) {
      for (std::size_t i = 0; i < kJointCount; ++i) {
        const json& k = kps[i];
        if (!k.is_array() || k.size() != 3) fail(ErrorKind::format, "keypoint must be [x, y, v]");
        ann.keypoints[i] = make_keypoint(k[0].get<double>(), k[1].get<double>(), k[2].get<int>());
      }
    } else {
      fail(ErrorKind::format, "expected 17 keypoints");
    }

    if (doc.contains("bbox") && !doc["bbox"].is_null()) {
      const auto b = doc["bbox"].get<std::vector<double>>();
      if (b.size() != 4 || b[2] < 0 || b[3] < 0) fail(ErrorKind::format, "bbox must be [x, y, w, h]");
      ann.bbox = BoundingBox{b[0], b[1], b[2], b[3]};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::format, e.what());
  }

  if (!(ann.image_width > 0) || !(ann.image_height > 0)) {
    fail(ErrorKind::format, "image dimensions must be positive");
  }
  const double margin = kKeypointMargin * std::max(ann.image_width, ann.image_height);
  for (const Keypoint& k : ann.keypoints) {
    if (!k.present()) continue;
    if (k.x < -margin || k.y < -margin || k.x > ann.image_width + margin ||
        k.y > ann.image_height + margin) {
      fail(ErrorKind::format, "keypoint outside the image");
    }
  }
  return ann;
}

AnnotationSet read_annotations(std::istream& in) {
  AnnotationSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      set.people.push_back(parse_annotation(line, std::to_string(line_no - 1)));
    } catch (const Error& e) {
      ++set.skipped;
      set.problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open annotations " + path.string());
  return read_annotations(in);
}

std::string to_json_line(const PersonAnnotation& ann) {
  json kps = json::array();
  for (const Keypoint& k : ann.keypoints) {
    kps.push_back({k.x, k.y, static_cast<int>(k.visibility)});
  }
  json doc{{"id", ann.id},
           {"image_id", ann.image_id},
           {"image_width", ann.image_width},
           {"image_height", ann.image_height},
           {"keypoints", kps}};
  if (ann.bbox) doc["bbox"] = {ann.bbox->x, ann.bbox->y, ann.bbox->width, ann.bbox->height};
  return doc.dump();
}

}  // namespace partprobe
