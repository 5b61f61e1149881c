#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <set>

#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "partprobe/metrics.hpp"
#include "partprobe/model.hpp"
#include "partprobe/simd.hpp"
#include "report_io.hpp"
#include "toml_config.hpp"

namespace partprobe::cli {

using detail::csv_row;
using detail::log_line;

namespace {

// Options left unset on the command line take their value from the
// subcommand's `--config` file. Keys are the long option names with dashes
// replaced by underscores; a `[<subcommand>]` table takes precedence over
// top-level keys.
void apply_config_file(CLI::App& sub, const fs::path& file) {
  const toml::table root = detail::parse_toml(file);
  const toml::table* section = root[sub.get_name()].as_table();
  for (CLI::Option* opt : sub.get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    std::string key = opt->get_lnames().front();
    if (key == "config" || key == "help") continue;
    std::replace(key.begin(), key.end(), '-', '_');
    const toml::node* node = section ? section->get(key) : nullptr;
    if (!node) node = root.get(key);
    if (!node) continue;

    std::vector<std::string> values;
    auto scalar = [&](const toml::node& n) -> std::string {
      if (auto s = n.value_exact<std::string>()) return *s;
      if (auto i = n.value_exact<std::int64_t>()) return std::to_string(*i);
      if (auto d = n.value_exact<double>()) return format_number(*d);
      if (auto b = n.value_exact<bool>()) return *b ? "true" : "false";
      fail(ErrorKind::usage, "config key '" + key + "' has an unsupported type");
    };
    if (const toml::array* arr = node->as_array()) {
      for (const toml::node& item : *arr) values.push_back(scalar(item));
    } else {
      values.push_back(scalar(*node));
    }
    if (values.empty()) continue;
    try {
      opt->add_result(values);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      fail(ErrorKind::usage, "config key '" + key + "': " + e.what());
    }
  }
}

void require_value(bool present, const std::string& what) {
  if (!present) fail(ErrorKind::usage, "missing required setting " + what);
}

std::vector<Concept> parse_concepts(const std::vector<std::string>& names) {
  std::vector<Concept> out;
  for (const auto& n : names) out.push_back(parse_concept(n));
  return out;
}

struct TrainFlags {
  std::string loss = "dice";
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 5;
  std::uint64_t seed = 0;
  std::size_t kh = 1, kw = 1;

  void add_to(CLI::App& app) {
    app.add_option("--loss", loss, "dice | bce_batch_weighted | bce_global_weighted");
    app.add_option("--optimizer", optimizer, "adam | sgd");
    app.add_option("--learning-rate", learning_rate);
    app.add_option("--batch-size", batch_size);
    app.add_option("--max-epochs", max_epochs);
    app.add_option("--seed", seed);
    app.add_option("--kh", kh, "kernel height (odd)");
    app.add_option("--kw", kw, "kernel width (odd)");
  }
  TrainConfig config() const {
    TrainConfig cfg;
    cfg.loss = parse_loss_kind(loss);
    if (optimizer == "adam") cfg.optimizer = OptimizerKind::adam;
    else if (optimizer == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else fail(ErrorKind::usage, "unknown optimizer '" + optimizer + "'");
    cfg.learning_rate = learning_rate;
    cfg.batch_size = batch_size;
    cfg.max_epochs = max_epochs;
    cfg.seed = seed;
    cfg.kh = kh;
    cfg.kw = kw;
    cfg.validate();
    return cfg;
  }
};

// Images of the dataset directory restricted to a size category.
std::vector<ImageRow> dataset_images(const fs::path& dir, const std::string& category,
                                     std::vector<Concept>& concepts) {
  std::vector<ImageRow> rows = read_images_csv(dir / "images.csv", concepts);
  if (category == "all") return rows;
  const SizeCategory wanted = parse_size_category(category);
  std::erase_if(rows, [&](const ImageRow& r) { return r.category != wanted; });
  return rows;
}

std::size_t concept_column(const std::vector<Concept>& concepts, Concept part) {
  auto it = std::find(concepts.begin(), concepts.end(), part);
  if (it == concepts.end()) {
    fail(ErrorKind::usage, "dataset has no masks for concept " + std::string(to_string(part)));
  }
  return static_cast<std::size_t>(it - concepts.begin());
}

void emit_csv(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") std::cout << content;
  else detail::write_text(path, content);
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"Concept embedding analysis on cached activation maps"};
  app.require_subcommand(1);
  std::string simd = "auto";
  bool quiet = false;
  app.add_option("--simd", simd, "kernel variant: auto | scalar")->check(CLI::IsMember({"auto", "scalar"}));
  app.add_flag("-q,--quiet", quiet, "suppress log lines on stderr");

  std::map<CLI::App*, std::string> config_of;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_of[sub], "TOML or JSON file supplying defaults for unset flags");
    return sub;
  };

  // build-dataset / estimate-sizes
  BuildDatasetOptions build_opts;
  std::string annotations, output;
  std::vector<std::string> concept_names;
  bool no_masks = false;
  CLI::App* build_cmd = with_config(app.add_subcommand("build-dataset", "rasterize masks and index person sizes"));
  CLI::App* sizes_cmd = with_config(app.add_subcommand("estimate-sizes", "write sizes.csv and the size histogram"));
  for (CLI::App* sub : {build_cmd, sizes_cmd}) {
    sub->add_option("--annotations", annotations, "JSON Lines person annotations");
    sub->add_option("--output", output, "output directory");
    sub->add_option("--target-side", build_opts.target_side, "letterbox side in pixels");
    sub->add_option("--concepts", concept_names, "leg arm foot hand eye");
    sub->add_option("--h-standard", build_opts.h_standard, "assumed real body height (m)");
  }
  build_cmd->add_flag("--no-masks", no_masks, "skip writing PGM masks");

  // train
  TrainFlags train_flags;
  std::string cache_dir, dataset_dir, concept_name, category = "all", model_name;
  CLI::App* train_cmd = with_config(app.add_subcommand("train", "train one concept model"));
  train_cmd->add_option("--cache", cache_dir, "activation cache directory");
  train_cmd->add_option("--dataset", dataset_dir, "directory written by build-dataset");
  train_cmd->add_option("--concept", concept_name);
  train_cmd->add_option("--category", category, "all | far | middle | close | very_close");
  train_cmd->add_option("--output", output, "model directory");
  train_cmd->add_option("--name", model_name, "model file stem (default <concept>)");
  train_flags.add_to(*train_cmd);

  // evaluate
  std::string model_path, ids_path, report_path;
  std::size_t eval_batch = 8;
  CLI::App* eval_cmd = with_config(app.add_subcommand("evaluate", "batch-mean set IoU of a model"));
  eval_cmd->add_option("--model", model_path, "model sidecar (.json)");
  eval_cmd->add_option("--cache", cache_dir);
  eval_cmd->add_option("--dataset", dataset_dir);
  eval_cmd->add_option("--category", category);
  eval_cmd->add_option("--ids", ids_path, "restrict to the image ids listed in this file");
  eval_cmd->add_option("--batch-size", eval_batch);
  eval_cmd->add_option("--output", report_path, "CSV file (default stdout)");

  // similarity
  std::vector<std::string> model_paths;
  CLI::App* sim_cmd = with_config(app.add_subcommand("similarity", "cosine similarity matrix of models"));
  sim_cmd->add_option("--models", model_paths, "model sidecars, grouped by their concept");
  sim_cmd->add_option("--output", report_path, "CSV file (default stdout)");

  // size-bias
  std::string target_path;
  CLI::App* bias_cmd = with_config(app.add_subcommand("size-bias", "least-squares decomposition over size models"));
  bias_cmd->add_option("--target", target_path, "model trained on all sizes");
  bias_cmd->add_option("--basis", model_paths, "models trained on single size categories");
  bias_cmd->add_option("--output", report_path, "CSV file (default stdout)");

  // run
  std::string spec_path;
  std::optional<std::uint64_t> seed_override;
  bool serial = false;
  CLI::App* run_cmd = app.add_subcommand("run", "full study from an experiment file");
  run_cmd->add_option("--config", spec_path, "experiment file (TOML or JSON)")->required();
  run_cmd->add_option("--output", output, "override the output directory");
  run_cmd->add_option("--seed", seed_override, "override the training seed");
  run_cmd->add_flag("--serial", serial, "train folds one after another");

  // plot
  std::string reports_dir;
  CLI::App* plot_cmd = with_config(app.add_subcommand("plot", "gnuplot-ready series from a report directory"));
  plot_cmd->add_option("--reports", reports_dir, "report directory written by run");
  plot_cmd->add_option("--output", output, "destination (default <reports>/plots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    detail::set_quiet(quiet);
    if (simd == "scalar") simd::set_active_kernels(simd::scalar_kernels());
    for (auto& [sub, file] : config_of) {
      if (sub->parsed() && !file.empty()) apply_config_file(*sub, file);
    }

    if (build_cmd->parsed() || sizes_cmd->parsed()) {
      require_value(!annotations.empty(), "--annotations");
      require_value(!output.empty(), "--output");
      build_opts.annotations = annotations;
      build_opts.output = output;
      if (!concept_names.empty()) build_opts.concepts = parse_concepts(concept_names);
      if (build_cmd->parsed()) {
        build_opts.write_masks = !no_masks;
        build_dataset(build_opts);
      } else {
        fs::create_directories(output);
        const BuildDatasetSummary s = estimate_sizes(build_opts);
        write_sizes_csv(fs::path(output) / "sizes.csv", s);
        write_histogram_csv(fs::path(output) / "size_histogram.csv", s);
        log_line(std::to_string(s.sizes.size()) + " annotations sized, " +
                 std::to_string(s.skipped_records) + " skipped");
      }
      return 0;
    }

    if (train_cmd->parsed()) {
      require_value(!cache_dir.empty(), "--cache");
      require_value(!dataset_dir.empty(), "--dataset");
      require_value(!concept_name.empty(), "--concept");
      require_value(!output.empty(), "--output");
      const Concept part = parse_concept(concept_name);
      const TrainConfig cfg = train_flags.config();
      const ActivationCache cache = ActivationCache::open(cache_dir);
      std::vector<Concept> concepts;
      const auto images = dataset_images(dataset_dir, category, concepts);
      const Dataset data =
          concept_dataset(dataset_dir, images, concept_column(concepts, part), part, &cache);
      if (data.empty()) fail(ErrorKind::degenerate, "no training samples for " + concept_name);
      log_line("training " + concept_name + " on " + std::to_string(data.size()) + " samples");
      TrainResult result = train(data, cache, cfg, concept_name);
      const std::string stem = model_name.empty() ? concept_name : model_name;
      save_model(output, stem, result.model);
      std::string history = csv_row({"epoch", "loss"});
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        history += csv_row({std::to_string(e + 1), format_number(result.epoch_loss[e])});
      }
      detail::write_text(fs::path(output) / (stem + "_history.csv"), history);
      return 0;
    }

    if (eval_cmd->parsed()) {
      require_value(!model_path.empty(), "--model");
      require_value(!cache_dir.empty(), "--cache");
      require_value(!dataset_dir.empty(), "--dataset");
      const ConceptModel model = load_model(model_path);
      const Concept part = parse_concept(model.concept_name);
      const ActivationCache cache = ActivationCache::open(cache_dir);
      std::vector<Concept> concepts;
      auto images = dataset_images(dataset_dir, category, concepts);
      if (!ids_path.empty()) {
        std::ifstream in(ids_path);
        if (!in) fail(ErrorKind::io, "cannot open " + ids_path);
        std::set<std::string> ids;
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) ids.insert(line);
        }
        std::erase_if(images, [&](const ImageRow& r) { return !ids.count(r.image_id); });
      }
      const Dataset data =
          concept_dataset(dataset_dir, images, concept_column(concepts, part), part, &cache);
      const EvalReport r = evaluate(model, data, cache, eval_batch);
      std::string out = csv_row({"layer", "concept", "category", "kernel", "samples", "batches",
                                 "mean_iou", "std_iou", "pooled_iou"});
      out += csv_row({model.layer, model.concept_name, category, r.kernel_setting,
                      std::to_string(data.size()), std::to_string(r.batch_iou.size()),
                      format_number(r.mean), format_number(r.stddev), format_number(r.pooled)});
      emit_csv(report_path, out);
      return 0;
    }

    if (sim_cmd->parsed()) {
      require_value(!model_paths.empty(), "--models");
      std::vector<std::pair<std::string, std::vector<ConceptModel>>> groups;
      for (const auto& p : model_paths) {
        ConceptModel m = load_model(p);
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == m.concept_name; });
        if (it == groups.end()) groups.emplace_back(m.concept_name, std::vector<ConceptModel>{});
        it = std::find_if(groups.begin(), groups.end(),
                          [&](const auto& g) { return g.first == m.concept_name; });
        it->second.push_back(std::move(m));
      }
      const SimilarityMatrix sim = similarity_matrix(groups);
      std::vector<std::string> header{"concept"};
      header.insert(header.end(), sim.concepts.begin(), sim.concepts.end());
      std::string out = csv_row(header);
      for (std::size_t i = 0; i < sim.concepts.size(); ++i) {
        std::vector<std::string> row{sim.concepts[i]};
        for (std::size_t j = 0; j < sim.concepts.size(); ++j) row.push_back(format_number(sim.at(i, j)));
        out += csv_row(row);
      }
      emit_csv(report_path, out);
      return 0;
    }

    if (bias_cmd->parsed()) {
      require_value(!target_path.empty(), "--target");
      require_value(!model_paths.empty(), "--basis");
      const ConceptModel target = load_model(target_path);
      std::vector<std::vector<float>> basis;
      for (const auto& p : model_paths) basis.push_back(load_model(p).kernel);
      const LeastSquaresFit fit = least_squares_fit(target.kernel, basis);
      std::string out = csv_row({"basis", "coefficient", "cosine_to_target"});
      for (std::size_t i = 0; i < basis.size(); ++i) {
        out += csv_row({model_paths[i], format_number(fit.coefficients[i]),
                        format_number(cosine_similarity(target.kernel, basis[i]))});
      }
      out += csv_row({"fit", format_number(fit.fit_cosine), fit.degenerate ? "degenerate" : ""});
      emit_csv(report_path, out);
      return 0;
    }

    if (run_cmd->parsed()) {
      ExperimentSpec spec = load_experiment(spec_path);
      if (!output.empty()) spec.output = output;
      if (seed_override) spec.train.seed = *seed_override;
      if (serial) spec.parallel_folds = false;
      run_experiment(spec);
      return 0;
    }

    if (plot_cmd->parsed()) {
      require_value(!reports_dir.empty(), "--reports");
      const fs::path dest = output.empty() ? fs::path(reports_dir) / "plots" : fs::path(output);
      for (const auto& p : export_plot_data(reports_dir, dest)) log_line("wrote " + p.string());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "partprobe: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "partprobe: io error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace partprobe::cli
