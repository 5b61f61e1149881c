#pragma once

// Batch commands behind the `partprobe` executable. Each command is a plain
// function so tests can drive it without a process boundary.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "partprobe/concept.hpp"
#include "partprobe/dataset.hpp"
#include "partprobe/skeleton.hpp"
#include "partprobe/tensor.hpp"
#include "partprobe/train.hpp"

namespace partprobe::cli {

namespace fs = std::filesystem;

// ---- dataset building ------------------------------------------------------

struct BuildDatasetOptions {
  fs::path annotations;
  fs::path output;
  int target_side = 400;
  std::vector<Concept> concepts{kAllConcepts.begin(), kAllConcepts.end()};
  double h_standard = kStandardHeightM;
  bool write_masks = true;
};

struct SizeRow {
  std::string annotation_id;
  std::string image_id;
  std::optional<double> height_px;              // original image pixels
  std::optional<double> height_letterboxed_px;  // after letterboxing
  double relative = 0;
  SizeCategory category = SizeCategory::unknown;
  std::vector<bool> has_concept;  // parallel to the requested concepts
};

struct ImageRow {
  std::string image_id;
  std::size_t persons = 0;
  /// The common category of all persons with a known size, or unknown when
  /// they disagree or none is known.
  SizeCategory category = SizeCategory::unknown;
  std::optional<double> mean_height_letterboxed_px;
  std::vector<bool> has_concept;
};

struct BuildDatasetSummary {
  std::vector<Concept> concepts;
  std::vector<SizeRow> sizes;
  std::vector<ImageRow> images;
  std::size_t skipped_records = 0;
  /// histogram[category][0] counts all annotations, [1 + i] those showing
  /// concept i.
  std::map<SizeCategory, std::vector<std::size_t>> histogram;
};

/// Size estimation only (no files written).
BuildDatasetSummary estimate_sizes(const BuildDatasetOptions& opts);

/// Writes sizes.csv, images.csv, size_histogram.csv and, unless disabled,
/// masks/<image_id>_<concept>.pgm into opts.output.
BuildDatasetSummary build_dataset(const BuildDatasetOptions& opts);

void write_sizes_csv(const fs::path& path, const BuildDatasetSummary& summary);
void write_images_csv(const fs::path& path, const BuildDatasetSummary& summary);
void write_histogram_csv(const fs::path& path, const BuildDatasetSummary& summary);

/// Reads images.csv from a dataset directory.
std::vector<ImageRow> read_images_csv(const fs::path& path, std::vector<Concept>& concepts);

// ---- experiments ---------------------------------------------------------

enum class KernelMode { fixed_1x1, adaptive };
std::string_view to_string(KernelMode mode) noexcept;
KernelMode parse_kernel_mode(std::string_view name);

struct CacheRef {
  std::string net;
  std::string layer;
  fs::path path;
};

/// Study description. Category "all" means no size restriction.
struct ExperimentSpec {
  fs::path annotations;  // used to build the dataset when `dataset` is empty
  fs::path dataset;      // directory produced by build-dataset
  fs::path output;
  int target_side = 400;
  double h_standard = kStandardHeightM;
  std::vector<Concept> concepts;
  std::vector<std::string> categories{"all"};
  std::vector<KernelMode> kernel_modes{KernelMode::fixed_1x1};
  std::size_t folds = 5;
  fs::path test_ids;           // one image id per line
  double test_fraction = 0.2;  // used when test_ids is empty
  bool parallel_folds = true;
  TrainConfig train;
  std::vector<CacheRef> caches;

  /// Usage error for unknown categories, empty concept or cache lists.
  void validate() const;
};

/// Parses a TOML experiment file. Relative paths resolve against the file's
/// directory.
ExperimentSpec load_experiment(const fs::path& file);

struct RunSummary {
  std::size_t trained_settings = 0;
  std::size_t cv_rows = 0;
  std::size_t eval_rows = 0;
  std::vector<fs::path> written;
};

/// Full study: k-fold CV for every (net, layer, concept, train category,
/// kernel mode), evaluation on every test category, similarity matrices and
/// size decomposition. Fails before training when a cache is missing.
RunSummary run_experiment(const ExperimentSpec& spec);

// ---- plot data -------------------------------------------------------------

/// Turns a report directory into gnuplot-ready .dat series. Returns the
/// files written; degenerate error when there is nothing to plot.
std::vector<fs::path> export_plot_data(const fs::path& report_dir, const fs::path& out_dir);

// ---- helpers shared by the commands -------------------------------------

/// Fixed "%.8g" formatting so reruns produce identical bytes.
std::string format_number(double v);

/// Images showing the concept (and present in `cache` when given), with
/// masks read lazily from dataset_dir/masks.
Dataset concept_dataset(const fs::path& dataset_dir, std::span<const ImageRow> images,
                        std::size_t concept_column, Concept part,
                        const ActivationCache* cache = nullptr);

/// Keys of a `[train]` table: loss, optimizer, learning_rate, batch_size,
/// max_epochs, seed, kh, kw, beta1, beta2, epsilon, global_pos_frac.
TrainConfig load_train_config(const fs::path& file);

/// Entry point of the executable; returns the process exit code.
int run_main(int argc, char** argv);

}  // namespace partprobe::cli
