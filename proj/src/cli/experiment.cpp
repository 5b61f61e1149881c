#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "partprobe/metrics.hpp"
#include "partprobe/model.hpp"
#include "report_io.hpp"

namespace partprobe::cli {

using detail::csv_row;
using detail::log_line;

namespace {

constexpr std::array<std::string_view, 3> kSizeCategories{"far", "middle", "close"};

// Layer names such as "vgg16/features.8" become file-name safe.
std::string file_token(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '-' || ch == '.';
    out += ok ? ch : '_';
  }
  return out;
}

std::vector<ImageRow> restrict_to(const std::vector<ImageRow>& images, const std::string& category) {
  if (category == "all") return images;
  const SizeCategory wanted = parse_size_category(category);
  std::vector<ImageRow> out;
  for (const auto& img : images) {
    if (img.category == wanted) out.push_back(img);
  }
  return out;
}

std::set<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open test id list " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

// Seeded split over the sorted image ids.
std::set<std::string> seeded_test_split(const std::vector<ImageRow>& images, double fraction,
                                        std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& img : images) ids.push_back(img.image_id);
  std::sort(ids.begin(), ids.end());
  SeededRng rng(seed ^ 0x7e57'5e7ull);
  rng.shuffle(ids);
  std::size_t n_test = static_cast<std::size_t>(std::llround(fraction * double(ids.size())));
  if (ids.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, ids.size()))};
}

struct SettingKey {
  std::size_t cache;
  std::size_t concept_index;
  std::string category;
  KernelMode mode;
  auto operator<=>(const SettingKey&) const = default;
};

struct Setting {
  std::size_t kh = 1, kw = 1;
  std::vector<ConceptModel> fold_models;
  std::optional<ConceptModel> mean;
  double cv_mean = 0, cv_std = 0;
  std::map<std::string, double> test_mean;  // mean model, per test category
};

}  // namespace

RunSummary run_experiment(const ExperimentSpec& spec) {
  spec.validate();

  std::vector<std::string> missing;
  for (const auto& c : spec.caches) {
    if (!fs::exists(c.path / "manifest.json")) {
      missing.push_back(c.net + "/" + c.layer + " (" + c.path.string() + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing activation caches:";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorKind::io, msg);
  }
  std::vector<ActivationCache> caches;
  for (const auto& c : spec.caches) caches.push_back(ActivationCache::open(c.path));

  fs::create_directories(spec.output);
  RunSummary summary;

  fs::path dataset_dir = spec.dataset;
  if (dataset_dir.empty()) {
    BuildDatasetOptions opts;
    opts.annotations = spec.annotations;
    opts.output = spec.output / "dataset";
    opts.target_side = spec.target_side;
    opts.concepts = spec.concepts;
    opts.h_standard = spec.h_standard;
    build_dataset(opts);
    dataset_dir = opts.output;
  }
  std::vector<Concept> dataset_concepts;
  const std::vector<ImageRow> images = read_images_csv(dataset_dir / "images.csv", dataset_concepts);
  std::vector<std::size_t> columns;
  for (Concept c : spec.concepts) {
    auto it = std::find(dataset_concepts.begin(), dataset_concepts.end(), c);
    if (it == dataset_concepts.end()) {
      fail(ErrorKind::usage, "dataset has no masks for concept " + std::string(to_string(c)));
    }
    columns.push_back(static_cast<std::size_t>(it - dataset_concepts.begin()));
  }

  const std::set<std::string> test_ids = spec.test_ids.empty()
                                             ? seeded_test_split(images, spec.test_fraction,
                                                                 spec.train.seed)
                                             : read_id_list(spec.test_ids);
  std::vector<ImageRow> train_images, test_images;
  for (const auto& img : images) {
    (test_ids.count(img.image_id) ? test_images : train_images).push_back(img);
  }
  log_line("split: " + std::to_string(train_images.size()) + " train, " +
           std::to_string(test_images.size()) + " test images");

  const fs::path model_root = spec.output / "models";
  std::string cv_csv = csv_row({"net", "layer", "concept", "train_category", "kernel_mode", "kh",
                                "kw", "fold", "train_size", "val_size", "val_mean_iou",
                                "val_std_iou", "val_pooled_iou", "final_loss"});
  std::string eval_csv = csv_row({"net", "layer", "concept", "train_category", "kernel_mode",
                                  "kh", "kw", "model", "test_category", "test_size", "batches",
                                  "mean_iou", "std_iou", "pooled_iou"});
  std::map<SettingKey, Setting> settings;

  for (std::size_t ci = 0; ci < caches.size(); ++ci) {
    const CacheRef& ref = spec.caches[ci];
    const ActivationCache& cache = caches[ci];
    const double stride = double(spec.target_side) / double(cache.manifest().height);
    const fs::path model_dir = model_root / file_token(ref.net) / file_token(ref.layer);

    for (std::size_t k = 0; k < spec.concepts.size(); ++k) {
      const Concept part = spec.concepts[k];
      const std::string cname(to_string(part));
      for (const std::string& category : spec.categories) {
        const std::vector<ImageRow> pool = restrict_to(train_images, category);
        const Dataset train_set = concept_dataset(dataset_dir, pool, columns[k], part, &cache);
        if (train_set.size() < spec.folds) {
          log_line("skipping " + ref.net + "/" + ref.layer + " " + cname + " " + category + ": " +
                   std::to_string(train_set.size()) + " samples for " +
                   std::to_string(spec.folds) + " folds");
          continue;
        }
        for (KernelMode mode : spec.kernel_modes) {
          TrainConfig cfg = spec.train;
          cfg.kh = cfg.kw = 1;
          if (mode == KernelMode::adaptive) {
            double sum = 0;
            std::size_t n = 0;
            for (const auto& img : pool) {
              if (img.mean_height_letterboxed_px && img.has_concept[columns[k]]) {
                sum += *img.mean_height_letterboxed_px;
                ++n;
              }
            }
            if (n == 0) {
              log_line("skipping adaptive " + cname + " " + category + ": no person sizes");
              continue;
            }
            std::tie(cfg.kh, cfg.kw) = adaptive_kernel(sum / double(n), part, stride);
          }
          const std::string mode_name(to_string(mode));
          const std::string stem = cname + "_" + category + "_" + mode_name;
          log_line("training " + ref.net + "/" + ref.layer + " " + stem + " (" +
                   std::to_string(cfg.kh) + "x" + std::to_string(cfg.kw) + ", " +
                   std::to_string(train_set.size()) + " samples)");

          CrossValidationResult cv =
              cross_validate(train_set, cache, cfg, spec.folds, cname, spec.parallel_folds);
          Setting s;
          s.kh = cfg.kh;
          s.kw = cfg.kw;
          s.cv_mean = cv.mean_iou;
          s.cv_std = cv.stddev_iou;
          const std::vector<std::string> lead{ref.net, ref.layer, cname, category, mode_name,
                                              std::to_string(cfg.kh), std::to_string(cfg.kw)};
          for (auto& fold : cv.folds) {
            fold.model.layer = ref.layer;
            std::vector<std::string> row = lead;
            row.push_back(std::to_string(fold.fold));
            row.push_back(std::to_string(train_set.size() - fold.validation_indices.size()));
            row.push_back(std::to_string(fold.validation_indices.size()));
            row.push_back(format_number(fold.validation.mean));
            row.push_back(format_number(fold.validation.stddev));
            row.push_back(format_number(fold.validation.pooled));
            row.push_back(fold.epoch_loss.empty() ? "" : format_number(fold.epoch_loss.back()));
            cv_csv += csv_row(row);
            ++summary.cv_rows;
            save_model(model_dir, stem + "_fold" + std::to_string(fold.fold), fold.model);
            s.fold_models.push_back(fold.model);
          }
          try {
            s.mean = mean_model(s.fold_models);
            s.mean->layer = ref.layer;
            save_model(model_dir, stem + "_mean", *s.mean);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::degenerate) throw;
            log_line("no mean model for " + stem + ": " + e.what());
          }

          for (const std::string& test_category : spec.categories) {
            const Dataset test_set = concept_dataset(
                dataset_dir, restrict_to(test_images, test_category), columns[k], part, &cache);
            if (test_set.empty()) continue;
            auto emit = [&](const ConceptModel& m, const std::string& label) {
              const EvalReport r = evaluate(m, test_set, cache, cfg.batch_size);
              std::vector<std::string> row = lead;
              row.insert(row.end(), {label, test_category, std::to_string(test_set.size()),
                                     std::to_string(r.batch_iou.size()), format_number(r.mean),
                                     format_number(r.stddev), format_number(r.pooled)});
              eval_csv += csv_row(row);
              ++summary.eval_rows;
              return r.mean;
            };
            for (std::size_t f = 0; f < s.fold_models.size(); ++f) {
              emit(s.fold_models[f], "fold" + std::to_string(f));
            }
            if (s.mean) s.test_mean[test_category] = emit(*s.mean, "mean");
          }
          settings.emplace(SettingKey{ci, k, category, mode}, std::move(s));
          ++summary.trained_settings;
        }
      }
    }
  }

  auto emit_file = [&](const fs::path& path, const std::string& content) {
    detail::write_text(path, content);
    summary.written.push_back(path);
  };
  emit_file(spec.output / "cv.csv", cv_csv);
  emit_file(spec.output / "eval.csv", eval_csv);

  // Similarity of 1x1 models; adaptive kernels differ in shape across
  // concepts and are not comparable.
  for (std::size_t ci = 0; ci < caches.size(); ++ci) {
    for (const std::string& category : spec.categories) {
      std::vector<std::pair<std::string, std::vector<ConceptModel>>> groups;
      for (std::size_t k = 0; k < spec.concepts.size(); ++k) {
        auto it = settings.find(SettingKey{ci, k, category, KernelMode::fixed_1x1});
        if (it == settings.end()) continue;
        groups.emplace_back(std::string(to_string(spec.concepts[k])), it->second.fold_models);
      }
      if (groups.empty()) continue;
      const SimilarityMatrix sim = similarity_matrix(groups);
      std::vector<std::string> header{"concept"};
      header.insert(header.end(), sim.concepts.begin(), sim.concepts.end());
      std::string out = csv_row(header);
      for (std::size_t i = 0; i < sim.concepts.size(); ++i) {
        std::vector<std::string> row{sim.concepts[i]};
        for (std::size_t j = 0; j < sim.concepts.size(); ++j) row.push_back(format_number(sim.at(i, j)));
        out += csv_row(row);
      }
      emit_file(spec.output / ("similarity_" + file_token(spec.caches[ci].net) + "_" +
                               file_token(spec.caches[ci].layer) + "_" + category + ".csv"),
                out);
    }
  }

  // Size bias: is the all-sizes mean vector a combination of the per-size
  // mean vectors, and how close is it to each of them.
  std::string decomposition = csv_row({"net", "layer", "concept", "basis", "coefficients",
                                       "fit_cosine", "degenerate", "residual_norm"});
  std::string size_similarity =
      csv_row({"net", "layer", "concept", "category", "cosine_to_all"});
  bool any_decomposition = false;
  for (std::size_t ci = 0; ci < caches.size(); ++ci) {
    for (std::size_t k = 0; k < spec.concepts.size(); ++k) {
      auto all = settings.find(SettingKey{ci, k, "all", KernelMode::fixed_1x1});
      if (all == settings.end() || !all->second.mean) continue;
      std::vector<std::vector<float>> basis;
      std::string basis_names;
      for (std::string_view cat : kSizeCategories) {
        auto it = settings.find(SettingKey{ci, k, std::string(cat), KernelMode::fixed_1x1});
        if (it == settings.end() || !it->second.mean) continue;
        basis.push_back(it->second.mean->kernel);
        basis_names += (basis_names.empty() ? "" : ";") + std::string(cat);
        const double cos = cosine_similarity(all->second.mean->kernel, it->second.mean->kernel);
        size_similarity += csv_row({spec.caches[ci].net, spec.caches[ci].layer,
                                    std::string(to_string(spec.concepts[k])), std::string(cat),
                                    format_number(cos)});
      }
      if (basis.empty()) continue;
      const LeastSquaresFit fit = least_squares_fit(all->second.mean->kernel, basis);
      std::string coefficients;
      for (double c : fit.coefficients) {
        coefficients += (coefficients.empty() ? "" : ";") + format_number(c);
      }
      double residual = 0;
      for (double r : fit.residual) residual += r * r;
      decomposition += csv_row({spec.caches[ci].net, spec.caches[ci].layer,
                                std::string(to_string(spec.concepts[k])), basis_names,
                                coefficients, format_number(fit.fit_cosine),
                                fit.degenerate ? "1" : "0", format_number(std::sqrt(residual))});
      any_decomposition = true;
    }
  }
  if (any_decomposition) {
    emit_file(spec.output / "size_decomposition.csv", decomposition);
    emit_file(spec.output / "size_similarity.csv", size_similarity);
  }

  nlohmann::json report;
  report["target_side"] = spec.target_side;
  report["folds"] = spec.folds;
  report["seed"] = spec.train.seed;
  report["loss"] = std::string(to_string(spec.train.loss));
  report["train_images"] = train_images.size();
  report["test_images"] = test_images.size();
  report["settings"] = nlohmann::json::array();
  for (const auto& [key, s] : settings) {
    nlohmann::json entry;
    entry["net"] = spec.caches[key.cache].net;
    entry["layer"] = spec.caches[key.cache].layer;
    entry["concept"] = std::string(to_string(spec.concepts[key.concept_index]));
    entry["train_category"] = key.category;
    entry["kernel_mode"] = std::string(to_string(key.mode));
    entry["kernel"] = {s.kh, s.kw};
    entry["cv_mean_iou"] = s.cv_mean;
    entry["cv_std_iou"] = s.cv_std;
    entry["test_mean_iou"] = s.test_mean;
    report["settings"].push_back(std::move(entry));
  }
  emit_file(spec.output / "summary.json", report.dump(2) + "\n");
  log_line("run finished: " + std::to_string(summary.trained_settings) + " settings");
  return summary;
}

}  // namespace partprobe::cli
