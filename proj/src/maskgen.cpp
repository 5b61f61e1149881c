#include "partprobe/maskgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "partprobe/error.hpp"

namespace partprobe {

std::string_view to_string(Concept c) noexcept {
  switch (c) {
    case Concept::leg: return "leg";
    case Concept::arm: return "arm";
    case Concept::foot: return "foot";
    case Concept::hand: return "hand";
    case Concept::eye: return "eye";
  }
  return "unknown";
}

Concept parse_concept(std::string_view name) {
  for (Concept c : kAllConcepts) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorKind::usage, "unknown concept '" + std::string(name) + "'");
}

namespace {

struct Stroke {
  Joint from;
  Joint to;
};

std::vector<Stroke> strokes_for(Concept part) {
  using J = Joint;
  switch (part) {
    case Concept::leg:
      return {{J::left_hip, J::left_knee}, {J::left_knee, J::left_ankle},
              {J::right_hip, J::right_knee}, {J::right_knee, J::right_ankle}};
    case Concept::arm:
      return {{J::left_shoulder, J::left_elbow}, {J::left_elbow, J::left_wrist},
              {J::right_shoulder, J::right_elbow}, {J::right_elbow, J::right_wrist}};
    case Concept::foot:
      return {{J::left_ankle, J::left_ankle}, {J::right_ankle, J::right_ankle}};
    case Concept::hand:
      return {{J::left_wrist, J::left_wrist}, {J::right_wrist, J::right_wrist}};
    case Concept::eye:
      return {{J::left_eye, J::left_eye}, {J::right_eye, J::right_eye}};
  }
  return {};
}

double segment_distance_sq(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len_sq = dx * dx + dy * dy;
  double t = 0;
  if (len_sq > 0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len_sq, 0.0, 1.0);
  const double ex = px - (ax + t * dx);
  const double ey = py - (ay + t * dy);
  return ex * ex + ey * ey;
}

void draw_capsule(BinaryMask& mask, double ax, double ay, double bx, double by, double radius) {
  const double r_sq = radius * radius;
  const auto lo = [](double v) { return static_cast<long>(std::floor(v - 0.5)); };
  const auto hi = [](double v) { return static_cast<long>(std::ceil(v - 0.5)); };
  const long x0 = std::max(0L, lo(std::min(ax, bx) - radius));
  const long x1 = std::min(static_cast<long>(mask.width) - 1, hi(std::max(ax, bx) + radius));
  const long y0 = std::max(0L, lo(std::min(ay, by) - radius));
  const long y1 = std::min(static_cast<long>(mask.height) - 1, hi(std::max(ay, by) + radius));
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      if (segment_distance_sq(x + 0.5, y + 0.5, ax, ay, bx, by) <= r_sq) {
        mask(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1;
      }
    }
  }
}

}  // namespace

LetterboxTransform letterbox(double orig_w, double orig_h, int target_side) {
  if (!(orig_w > 0) || !(orig_h > 0) || target_side <= 0) {
    fail(ErrorKind::domain, "letterbox needs positive dimensions");
  }
  const double side = std::max(orig_w, orig_h);
  LetterboxTransform t;
  t.pad_x = (side - orig_w) / 2;
  t.pad_y = (side - orig_h) / 2;
  t.scale = target_side / side;
  t.target_side = target_side;
  return t;
}

double stroke_width(const LetterboxTransform& t, const SizeEstimate& size) {
  if (size.height_px) return kStrokeFraction * *size.height_px * t.scale;
  return kStrokeFraction * t.target_side;
}

bool has_concept(const PersonAnnotation& ann, Concept part) {
  for (const Stroke& s : strokes_for(part)) {
    if (ann[s.from].present() && ann[s.to].present()) return true;
  }
  return false;
}

void rasterize_into(BinaryMask& mask, const PersonAnnotation& ann, Concept part,
                    const LetterboxTransform& t, const SizeEstimate& size) {
  const auto side = static_cast<std::size_t>(t.target_side);
  if (mask.height != side || mask.width != side) {
    fail(ErrorKind::shape, "mask does not match the letterbox target side");
  }
  const double radius = stroke_width(t, size) / 2;
  for (const Stroke& s : strokes_for(part)) {
    const Keypoint& a = ann[s.from];
    const Keypoint& b = ann[s.to];
    if (!a.present() || !b.present()) continue;
    draw_capsule(mask, t.map_x(a.x), t.map_y(a.y), t.map_x(b.x), t.map_y(b.y), radius);
  }
}

BinaryMask rasterize(const PersonAnnotation& ann, Concept part, const LetterboxTransform& t,
                     const SizeEstimate& size) {
  const auto side = static_cast<std::size_t>(t.target_side);
  BinaryMask mask(side, side, 0);
  rasterize_into(mask, ann, part, t, size);
  return mask;
}

void write_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<char> bytes(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<char>(v ? 255 : 0); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

BinaryMask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  const std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});

  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      fail(ErrorKind::format, path.string() + ": malformed PGM header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail(ErrorKind::format, path.string() + ": not a binary PGM");
  }
  pos = 2;
  const std::size_t width = read_uint();
  const std::size_t height = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval == 0 || maxval > 255) fail(ErrorKind::format, path.string() + ": unsupported maxval");
  ++pos;  // single whitespace before the raster
  if (bytes.size() - std::min(pos, bytes.size()) != width * height) {
    fail(ErrorKind::format, path.string() + ": raster size mismatch");
  }
  BinaryMask mask(height, width, 0);
  for (std::size_t i = 0; i < width * height; ++i) mask.data[i] = bytes[pos + i] != 0 ? 1 : 0;
  return mask;
}

std::string mask_filename(const std::string& image_id, Concept part) {
  return image_id + "_" + std::string(to_string(part)) + ".pgm";
}

}  // namespace partprobe
