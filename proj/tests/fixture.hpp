#pragma once

// Test-only data generators.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "partprobe/cli.hpp"
#include "partprobe/dataset.hpp"
#include "partprobe/plane.hpp"
#include "partprobe/skeleton.hpp"
#include "partprobe/tensor.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Disk masks with an activation channel that encodes them.
///
/// Masks are side x side with one filled disk (radius uniform in
/// [r_min, r_max], center uniform in [r/2, side - r/2]). Activations are
/// C x (side/pool) x (side/pool); channel `signal_channel` holds the
/// pool x pool average of the mask plus N(0, noise), every other channel
/// N(0, noise).
struct DiskFixtureOptions {
  std::size_t samples = 64;
  std::size_t side = 52;
  std::size_t pool = 4;
  std::size_t channels = 8;
  std::size_t signal_channel = 2;
  double r_min = 8;
  double r_max = 18;
  double noise = 0.1;
  std::uint64_t seed = 1;
  partprobe::DType dtype = partprobe::DType::bf16;
};

struct DiskFixture {
  fs::path cache_dir;
  std::vector<std::string> ids;
  std::vector<partprobe::BinaryMask> masks;
  std::vector<double> radius;

  /// In-memory masks paired with their ids.
  partprobe::Dataset dataset() const;
  partprobe::Dataset subset(std::size_t begin, std::size_t end) const;
};

DiskFixture make_disk_fixture(const fs::path& cache_dir, const DiskFixtureOptions& opts = {});

/// Turns a disk fixture into a build-dataset style directory (images.csv and
/// masks/<id>_<concept>.pgm) so the experiment runner can consume it. Size
/// categories cycle through far, middle, close; the mean person height is
/// derived from the disk radius.
void write_dataset_dir(const DiskFixture& fx, const fs::path& dir, partprobe::Concept part);

/// An annotation with every keypoint absent.
partprobe::PersonAnnotation blank_person(double width = 640, double height = 480);
void set_point(partprobe::PersonAnnotation& ann, partprobe::Joint j, double x, double y,
               partprobe::Visibility v = partprobe::Visibility::visible);

}  // namespace fixture
