#include "fixture.hpp"

#include <atomic>
#include <cmath>
#include <unistd.h>

#include "partprobe/maskgen.hpp"

namespace fixture {

using namespace partprobe;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("partprobe_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Dataset DiskFixture::dataset() const { return subset(0, ids.size()); }

Dataset DiskFixture::subset(std::size_t begin, std::size_t end) const {
  Dataset out;
  for (std::size_t i = begin; i < end; ++i) {
    LabeledSample s;
    s.id = ids[i];
    s.mask = std::make_shared<const BinaryMask>(masks[i]);
    out.push_back(std::move(s));
  }
  return out;
}

DiskFixture make_disk_fixture(const fs::path& cache_dir, const DiskFixtureOptions& opts) {
  const std::size_t cells = opts.side / opts.pool;
  SeededRng rng(opts.seed);
  DiskFixture fx;
  fx.cache_dir = cache_dir;
  ActivationCacheWriter writer(cache_dir, "synthetic/disk", opts.channels, cells, cells, opts.dtype);
  for (std::size_t n = 0; n < opts.samples; ++n) {
    const double r = rng.uniform(opts.r_min, opts.r_max);
    const double cx = rng.uniform(r / 2, double(opts.side) - r / 2);
    const double cy = rng.uniform(r / 2, double(opts.side) - r / 2);
    BinaryMask mask(opts.side, opts.side);
    for (std::size_t y = 0; y < opts.side; ++y) {
      for (std::size_t x = 0; x < opts.side; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        mask(y, x) = dx * dx + dy * dy <= r * r ? 1 : 0;
      }
    }
    std::vector<float> act(opts.channels * cells * cells);
    for (std::size_t c = 0; c < opts.channels; ++c) {
      for (std::size_t y = 0; y < cells; ++y) {
        for (std::size_t x = 0; x < cells; ++x) {
          double v = opts.noise * rng.normal();
          if (c == opts.signal_channel) {
            double s = 0;
            for (std::size_t py = 0; py < opts.pool; ++py)
              for (std::size_t px = 0; px < opts.pool; ++px)
                s += mask(y * opts.pool + py, x * opts.pool + px);
            v += s / double(opts.pool * opts.pool);
          }
          act[(c * cells + y) * cells + x] = static_cast<float>(v);
        }
      }
    }
    char id[32];
    std::snprintf(id, sizeof id, "img%04zu", n);
    writer.write_sample(id, Tensor({opts.channels, cells, cells}, std::move(act)));
    fx.ids.emplace_back(id);
    fx.masks.push_back(std::move(mask));
    fx.radius.push_back(r);
  }
  writer.finish();
  return fx;
}

void write_dataset_dir(const DiskFixture& fx, const fs::path& dir, Concept part) {
  fs::create_directories(dir / "masks");
  cli::BuildDatasetSummary s;
  s.concepts = {part};
  static constexpr SizeCategory cycle[] = {SizeCategory::far, SizeCategory::middle,
                                           SizeCategory::close};
  for (std::size_t i = 0; i < fx.ids.size(); ++i) {
    cli::ImageRow row;
    row.image_id = fx.ids[i];
    row.persons = 1;
    row.category = cycle[i % 3];
    // a disk of radius r read as an eye of a person 25 r tall
    row.mean_height_letterboxed_px = 25.0 * fx.radius[i];
    row.has_concept = {true};
    s.images.push_back(row);
    write_pgm(dir / "masks" / mask_filename(fx.ids[i], part), fx.masks[i]);
  }
  cli::write_images_csv(dir / "images.csv", s);
}

PersonAnnotation blank_person(double width, double height) {
  PersonAnnotation a;
  a.id = "p";
  a.image_id = "img";
  a.image_width = width;
  a.image_height = height;
  return a;
}

void set_point(PersonAnnotation& ann, Joint j, double x, double y, Visibility v) {
  ann[j] = Keypoint{x, y, v};
}

}  // namespace fixture
