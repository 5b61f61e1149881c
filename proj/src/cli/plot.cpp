#include <algorithm>
#include <map>

#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "report_io.hpp"

namespace partprobe::cli {

using detail::CsvTable;
using detail::log_line;

namespace {

// Column indices or nullopt (logged) when any is absent.
std::optional<std::vector<std::size_t>> require(const CsvTable& t, const fs::path& file,
                                                std::initializer_list<std::string_view> names) {
  std::vector<std::size_t> idx;
  bool ok = true;
  for (auto name : names) {
    const std::size_t i = t.column(name);
    if (i == std::string::npos) {
      log_line(file.filename().string() + ": missing column '" + std::string(name) + "'");
      ok = false;
    }
    idx.push_back(i);
  }
  if (!ok) return std::nullopt;
  return idx;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ' ';
    // gnuplot splits on whitespace
    std::string f = fields[i].empty() ? "NaN" : fields[i];
    std::replace(f.begin(), f.end(), ' ', '_');
    out += f;
  }
  return out + '\n';
}

std::string token(std::string s) {
  for (char& ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '-' || ch == '.';
    if (!ok) ch = '_';
  }
  return s;
}

}  // namespace

std::vector<fs::path> export_plot_data(const fs::path& report_dir, const fs::path& out_dir) {
  if (!fs::is_directory(report_dir)) {
    fail(ErrorKind::io, "report directory " + report_dir.string() + " does not exist");
  }
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path p = out_dir / name;
    detail::write_text(p, content);
    written.push_back(p);
  };

  // size distribution
  for (const fs::path& candidate :
       {report_dir / "size_histogram.csv", report_dir / "dataset" / "size_histogram.csv"}) {
    if (!fs::exists(candidate)) continue;
    const CsvTable t = detail::read_csv(candidate);
    if (!require(t, candidate, {"category", "annotations"})) break;
    std::string out = "# " + join(t.header);
    for (const auto& row : t.rows) out += join(row);
    emit("size_distribution.dat", out);
    break;
  }

  const fs::path eval_path = report_dir / "eval.csv";
  if (fs::exists(eval_path)) {
    const CsvTable t = detail::read_csv(eval_path);
    auto cols = require(t, eval_path,
                        {"net", "layer", "concept", "train_category", "kernel_mode", "model",
                         "test_category", "mean_iou", "std_iou"});
    if (cols) {
      const auto& c = *cols;
      enum { NET, LAYER, CONCEPT, TRAIN, MODE, MODEL, TEST, MEAN, STD };

      // IoU by layer: one block per (net, concept), layers in report order.
      std::map<std::pair<std::string, std::string>, std::vector<std::vector<std::string>>> series;
      std::vector<std::pair<std::string, std::string>> order;
      std::map<std::string, std::vector<std::string>> layers_of_net;
      for (const auto& r : t.rows) {
        if (r[c[MODEL]] != "mean" || r[c[MODE]] != "fixed_1x1" || r[c[TRAIN]] != "all" ||
            r[c[TEST]] != "all") {
          continue;
        }
        auto& layers = layers_of_net[r[c[NET]]];
        auto lit = std::find(layers.begin(), layers.end(), r[c[LAYER]]);
        const std::size_t layer_index = static_cast<std::size_t>(lit - layers.begin());
        if (lit == layers.end()) layers.push_back(r[c[LAYER]]);
        const auto key = std::make_pair(r[c[NET]], r[c[CONCEPT]]);
        if (!series.count(key)) order.push_back(key);
        series[key].push_back({std::to_string(layer_index), r[c[LAYER]], r[c[MEAN]], r[c[STD]]});
      }
      std::map<std::string, std::string> by_net;
      for (const auto& key : order) {
        std::string& out = by_net[key.first];
        if (!out.empty()) out += "\n\n";
        out += "# concept " + key.second + "\n# layer_index layer mean_iou std_iou\n";
        for (const auto& row : series[key]) out += join(row);
      }
      for (const auto& [net, content] : by_net) emit("iou_by_layer_" + token(net) + ".dat", content);

      // Size bias: for each size-restricted test set, the all-sizes model next
      // to the model trained on that size category.
      std::map<std::string, std::string> bias;
      for (const auto& r : t.rows) {
        if (r[c[MODEL]] != "mean" || r[c[TEST]] == "all" || r[c[TRAIN]] != r[c[TEST]]) continue;
        std::string all_iou;
        for (const auto& o : t.rows) {
          if (o[c[MODEL]] == "mean" && o[c[NET]] == r[c[NET]] && o[c[LAYER]] == r[c[LAYER]] &&
              o[c[CONCEPT]] == r[c[CONCEPT]] && o[c[TRAIN]] == "all" &&
              o[c[TEST]] == r[c[TEST]] && o[c[MODE]] == "fixed_1x1") {
            all_iou = o[c[MEAN]];
          }
        }
        std::string& out = bias[r[c[NET]] + "_" + r[c[LAYER]]];
        if (out.empty()) out = "# concept test_category kernel_mode iou_all_trained iou_size_trained\n";
        out += join({r[c[CONCEPT]], r[c[TEST]], r[c[MODE]], all_iou, r[c[MEAN]]});
      }
      for (const auto& [key, content] : bias) emit("size_bias_" + token(key) + ".dat", content);
    }
  }

  // similarity heatmaps
  std::vector<fs::path> sims;
  for (const auto& entry : fs::directory_iterator(report_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("similarity_", 0) == 0 && entry.path().extension() == ".csv") {
      sims.push_back(entry.path());
    }
  }
  std::sort(sims.begin(), sims.end());
  for (const auto& path : sims) {
    const CsvTable t = detail::read_csv(path);
    if (!require(t, path, {"concept"})) continue;
    std::string out = "# row col value; concepts:";
    for (std::size_t j = 1; j < t.header.size(); ++j) out += " " + t.header[j];
    out += '\n';
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      for (std::size_t j = 1; j < t.rows[i].size(); ++j) {
        out += join({std::to_string(i), std::to_string(j - 1), t.rows[i][j]});
      }
      out += '\n';
    }
    emit("heatmap_" + path.stem().string().substr(std::string("similarity_").size()) + ".dat", out);
  }

  if (written.empty()) {
    fail(ErrorKind::degenerate, "nothing to plot in " + report_dir.string());
  }
  return written;
}

}  // namespace partprobe::cli
