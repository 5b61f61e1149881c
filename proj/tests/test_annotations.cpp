#include <doctest.h>

#include <sstream>

#include "fixture.hpp"
#include "partprobe/annotations.hpp"
#include "test_util.hpp"

using namespace partprobe;

namespace {

std::string nested_keypoints() {
  std::string s = "[";
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (i) s += ",";
    s += i == 13 ? "[10,10,2]" : (i == 15 ? "[10,60,1]" : "[0,0,0]");
  }
  return s + "]";
}

}  // namespace

TEST_SUITE("annotations") {

TEST_CASE("nested keypoints with bbox") {
  const std::string line = R"({"id": 7, "image_id": "a1", "image_width": 640, "image_height": 480, "keypoints": )" +
                           nested_keypoints() + R"(, "bbox": [1, 2, 30, 40]})";
  const PersonAnnotation a = parse_annotation(line, "fallback");
  CHECK(a.id == "7");
  CHECK(a.image_id == "a1");
  CHECK(a[Joint::left_knee].visibility == Visibility::visible);
  CHECK(a[Joint::left_ankle].visibility == Visibility::occluded);
  CHECK(a[Joint::nose].visibility == Visibility::absent);
  REQUIRE(a.bbox.has_value());
  CHECK(a.bbox->height == 40);
  CHECK(link_length(a, LinkKind::lower_leg, Side::left) == doctest::Approx(50));
}

TEST_CASE("flat COCO keypoints and integer image ids") {
  std::string flat = "[";
  for (std::size_t i = 0; i < kJointCount; ++i) flat += std::string(i ? "," : "") + "1,2,2";
  flat += "]";
  const PersonAnnotation a = parse_annotation(
      R"({"image_id": 42, "image_width": 10, "image_height": 10, "keypoints": )" + flat + "}", "f");
  CHECK(a.image_id == "42");
  CHECK(a.id == "f");
  CHECK_FALSE(a.bbox.has_value());
  CHECK(a[Joint::right_ankle].x == 1);
}

TEST_CASE("malformed records") {
  const std::string kp = nested_keypoints();
  CHECK(thrown_kind([] { parse_annotation("{", "x"); }) == ErrorKind::format);
  CHECK(thrown_kind([] { parse_annotation("[]", "x"); }) == ErrorKind::format);
  CHECK(thrown_kind([&] {
          parse_annotation(R"({"image_width": 10, "image_height": 10, "keypoints": )" + kp + "}", "x");
        }) == ErrorKind::format);
  CHECK(thrown_kind([&] {
          parse_annotation(R"({"image_id": "a", "image_width": 0, "image_height": 10, "keypoints": )" + kp + "}", "x");
        }) == ErrorKind::format);
  CHECK(thrown_kind([] {
          parse_annotation(R"({"image_id": "a", "image_width": 10, "image_height": 10, "keypoints": [[1,1,2]]})", "x");
        }) == ErrorKind::format);
  // visibility 3
  std::string bad = kp;
  bad.replace(bad.find("[10,10,2]"), 9, "[10,10,3]");
  CHECK(thrown_kind([&] {
          parse_annotation(R"({"image_id": "a", "image_width": 640, "image_height": 480, "keypoints": )" + bad + "}", "x");
        }) == ErrorKind::format);
  // keypoint far outside the image
  std::string outside = kp;
  outside.replace(outside.find("[10,10,2]"), 9, "[900,10,2]");
  CHECK(thrown_kind([&] {
          parse_annotation(R"({"image_id": "a", "image_width": 640, "image_height": 480, "keypoints": )" + outside + "}", "x");
        }) == ErrorKind::format);
  // within the margin is fine
  std::string near = kp;
  near.replace(near.find("[10,10,2]"), 9, "[-20,10,2]");
  CHECK_NOTHROW(parse_annotation(
      R"({"image_id": "a", "image_width": 640, "image_height": 480, "keypoints": )" + near + "}", "x"));
}

TEST_CASE("reader skips and counts bad lines") {
  const std::string good = R"({"image_id": "a", "image_width": 640, "image_height": 480, "keypoints": )" +
                           nested_keypoints() + "}";
  std::istringstream in(good + "\n\nnot json\n" + good + "\n{\"image_id\": 1}\n");
  const AnnotationSet set = read_annotations(in);
  CHECK(set.people.size() == 2);
  CHECK(set.skipped == 2);
  CHECK(set.problems.size() == 2);
  CHECK(set.people[0].id != set.people[1].id);

  std::istringstream empty("");
  CHECK(read_annotations(empty).people.empty());
}

TEST_CASE("json line round trip") {
  PersonAnnotation a = fixture::blank_person();
  a.id = "p1";
  fixture::set_point(a, Joint::left_ear, 0, 0);
  fixture::set_point(a, Joint::right_ear, 3, 4, Visibility::occluded);
  a.bbox = BoundingBox{1, 2, 3, 4};
  const PersonAnnotation b = parse_annotation(to_json_line(a), "x");
  CHECK(b.id == a.id);
  CHECK(b.image_id == a.image_id);
  for (std::size_t i = 0; i < kJointCount; ++i) {
    CHECK(b.keypoints[i].x == a.keypoints[i].x);
    CHECK(b.keypoints[i].visibility == a.keypoints[i].visibility);
  }
  CHECK(link_length(b, LinkKind::ear_to_opposite_ear) == doctest::Approx(5));
}

}  // TEST_SUITE
