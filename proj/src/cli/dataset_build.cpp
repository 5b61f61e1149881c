#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <tuple>

#include "partprobe/annotations.hpp"
#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "partprobe/maskgen.hpp"
#include "report_io.hpp"

namespace partprobe::cli {

using detail::csv_row;
using detail::log_line;

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

namespace {

constexpr std::array<SizeCategory, 6> kReportedCategories{
    SizeCategory::far,          SizeCategory::middle,  SizeCategory::close,
    SizeCategory::very_close,   SizeCategory::out_of_range, SizeCategory::unknown};

// Ids end up in file names and CSV cells.
bool usable_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." &&
         id.find_first_of("/\\,\"\n\r") == std::string::npos;
}

struct ImageGroup {
  std::vector<std::size_t> persons;  // indices into the annotation list
};

BuildDatasetSummary build(const BuildDatasetOptions& opts, bool write_files) {
  if (opts.target_side <= 0) fail(ErrorKind::usage, "target side must be positive");
  if (opts.concepts.empty()) fail(ErrorKind::usage, "no concepts requested");

  AnnotationSet set = load_annotations(opts.annotations);
  for (const auto& p : set.problems) log_line("skipped record: " + p);

  BuildDatasetSummary summary;
  summary.concepts = opts.concepts;
  summary.skipped_records = set.skipped;
  for (SizeCategory c : kReportedCategories) {
    summary.histogram[c].assign(1 + opts.concepts.size(), 0);
  }

  std::vector<PersonAnnotation> people;
  for (auto& ann : set.people) {
    if (!usable_id(ann.image_id) || ann.id.find_first_of(",\"\n\r") != std::string::npos) {
      log_line("skipped record with unusable id '" + ann.id + "' / '" + ann.image_id + "'");
      ++summary.skipped_records;
      continue;
    }
    people.push_back(std::move(ann));
  }

  // sorted image order keeps every output independent of input order
  std::map<std::string, ImageGroup> images;
  std::vector<SizeEstimate> estimates(people.size());
  std::vector<LetterboxTransform> transforms(people.size());
  for (std::size_t i = 0; i < people.size(); ++i) {
    const PersonAnnotation& ann = people[i];
    images[ann.image_id].persons.push_back(i);
    transforms[i] = letterbox(ann.image_width, ann.image_height, opts.target_side);
    SizeEstimate est = estimate_body_height(ann, opts.h_standard);

    SizeRow row;
    row.annotation_id = ann.id;
    row.image_id = ann.image_id;
    row.height_px = est.height_px;
    if (est.height_px) {
      // categories are relative to the letterboxed side; est keeps
      // original-image pixels for the stroke width
      row.height_letterboxed_px = *est.height_px * transforms[i].scale;
      row.relative = *row.height_letterboxed_px / opts.target_side;
      est.relative = row.relative;
      est.category = categorize(row.height_letterboxed_px, opts.target_side);
    }
    row.category = est.category;
    estimates[i] = est;

    auto& bins = summary.histogram[row.category];
    ++bins[0];
    for (std::size_t c = 0; c < opts.concepts.size(); ++c) {
      const bool has = has_concept(ann, opts.concepts[c]);
      row.has_concept.push_back(has);
      if (has) ++bins[1 + c];
    }
    summary.sizes.push_back(std::move(row));
  }
  std::sort(summary.sizes.begin(), summary.sizes.end(), [](const SizeRow& a, const SizeRow& b) {
    return std::tie(a.image_id, a.annotation_id) < std::tie(b.image_id, b.annotation_id);
  });

  const fs::path mask_dir = opts.output / "masks";
  if (write_files && opts.write_masks) fs::create_directories(mask_dir);

  for (const auto& [image_id, group] : images) {
    ImageRow img;
    img.image_id = image_id;
    img.persons = group.persons.size();

    std::optional<SizeCategory> common;
    bool mixed = false;
    double height_sum = 0;
    std::size_t known = 0;
    for (std::size_t i : group.persons) {
      const SizeEstimate& est = estimates[i];
      if (!est.height_px) continue;
      height_sum += *est.height_px * transforms[i].scale;
      ++known;
      if (!common) common = est.category;
      else if (*common != est.category) mixed = true;
    }
    img.category = (common && !mixed) ? *common : SizeCategory::unknown;
    if (known) img.mean_height_letterboxed_px = height_sum / static_cast<double>(known);

    for (Concept part : opts.concepts) {
      BinaryMask mask(static_cast<std::size_t>(opts.target_side),
                      static_cast<std::size_t>(opts.target_side));
      for (std::size_t i : group.persons) {
        rasterize_into(mask, people[i], part, transforms[i], estimates[i]);
      }
      const bool any = std::any_of(mask.data.begin(), mask.data.end(),
                                   [](std::uint8_t v) { return v != 0; });
      img.has_concept.push_back(any);
      if (write_files && opts.write_masks) write_pgm(mask_dir / mask_filename(image_id, part), mask);
    }
    summary.images.push_back(std::move(img));
  }
  return summary;
}

std::vector<std::string> concept_header(const std::vector<Concept>& concepts) {
  std::vector<std::string> out;
  for (Concept c : concepts) out.emplace_back(to_string(c));
  return out;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

}  // namespace

BuildDatasetSummary estimate_sizes(const BuildDatasetOptions& opts) {
  return build(opts, false);
}

BuildDatasetSummary build_dataset(const BuildDatasetOptions& opts) {
  if (opts.output.empty()) fail(ErrorKind::usage, "no output directory");
  fs::create_directories(opts.output);
  BuildDatasetSummary summary = build(opts, true);
  write_sizes_csv(opts.output / "sizes.csv", summary);
  write_images_csv(opts.output / "images.csv", summary);
  write_histogram_csv(opts.output / "size_histogram.csv", summary);
  log_line("dataset: " + std::to_string(summary.sizes.size()) + " annotations, " +
           std::to_string(summary.images.size()) + " images, " +
           std::to_string(summary.skipped_records) + " skipped records");
  return summary;
}

void write_sizes_csv(const fs::path& path, const BuildDatasetSummary& summary) {
  std::vector<std::string> header{"annotation_id", "image_id", "height_px",
                                  "height_letterboxed_px", "relative", "category"};
  for (auto& name : concept_header(summary.concepts)) header.push_back(name);
  std::string out = csv_row(header);
  for (const SizeRow& r : summary.sizes) {
    std::vector<std::string> f{r.annotation_id, r.image_id, optional_number(r.height_px),
                               optional_number(r.height_letterboxed_px),
                               r.height_px ? format_number(r.relative) : std::string(),
                               std::string(to_string(r.category))};
    for (bool has : r.has_concept) f.emplace_back(has ? "1" : "0");
    out += csv_row(f);
  }
  detail::write_text(path, out);
}

void write_images_csv(const fs::path& path, const BuildDatasetSummary& summary) {
  std::vector<std::string> header{"image_id", "persons", "category", "mean_height_px"};
  for (auto& name : concept_header(summary.concepts)) header.push_back(name);
  std::string out = csv_row(header);
  for (const ImageRow& r : summary.images) {
    std::vector<std::string> f{r.image_id, std::to_string(r.persons),
                               std::string(to_string(r.category)),
                               optional_number(r.mean_height_letterboxed_px)};
    for (bool has : r.has_concept) f.emplace_back(has ? "1" : "0");
    out += csv_row(f);
  }
  detail::write_text(path, out);
}

void write_histogram_csv(const fs::path& path, const BuildDatasetSummary& summary) {
  std::vector<std::string> header{"category", "lo", "hi", "annotations"};
  for (auto& name : concept_header(summary.concepts)) header.push_back(name);
  std::string out = csv_row(header);
  for (SizeCategory c : kReportedCategories) {
    std::string lo, hi;
    for (const auto& range : kCategoryRanges) {
      if (range.category == c) {
        lo = format_number(range.lo);
        hi = format_number(range.hi);
      }
    }
    std::vector<std::string> f{std::string(to_string(c)), lo, hi};
    auto it = summary.histogram.find(c);
    const std::size_t width = 1 + summary.concepts.size();
    for (std::size_t i = 0; i < width; ++i) {
      f.push_back(std::to_string(it == summary.histogram.end() ? 0 : it->second[i]));
    }
    out += csv_row(f);
  }
  detail::write_text(path, out);
}

std::vector<ImageRow> read_images_csv(const fs::path& path, std::vector<Concept>& concepts) {
  const detail::CsvTable table = detail::read_csv(path);
  static const std::array<std::string_view, 4> fixed{"image_id", "persons", "category",
                                                    "mean_height_px"};
  if (table.header.size() < fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), table.header.begin())) {
    fail(ErrorKind::format, path.string() + ": unexpected header");
  }
  concepts.clear();
  for (std::size_t i = fixed.size(); i < table.header.size(); ++i) {
    concepts.push_back(parse_concept(table.header[i]));
  }
  std::vector<ImageRow> rows;
  for (const auto& f : table.rows) {
    ImageRow r;
    r.image_id = f[0];
    try {
      r.persons = std::stoul(f[1]);
      if (!f[3].empty()) r.mean_height_letterboxed_px = std::stod(f[3]);
    } catch (const std::exception&) {
      fail(ErrorKind::format, path.string() + ": bad number in row for " + f[0]);
    }
    r.category = parse_size_category(f[2]);
    for (std::size_t i = fixed.size(); i < f.size(); ++i) r.has_concept.push_back(f[i] == "1");
    rows.push_back(std::move(r));
  }
  return rows;
}

Dataset concept_dataset(const fs::path& dataset_dir, std::span<const ImageRow> images,
                        std::size_t concept_column, Concept part,
                        const ActivationCache* cache) {
  Dataset out;
  for (const ImageRow& img : images) {
    if (concept_column >= img.has_concept.size() || !img.has_concept[concept_column]) continue;
    if (cache && !cache->contains(img.image_id)) continue;
    LabeledSample s;
    s.id = img.image_id;
    s.mask_path = dataset_dir / "masks" / mask_filename(img.image_id, part);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace partprobe::cli
