#include <fstream>

#include <json.hpp>

#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "toml_config.hpp"

namespace partprobe::cli {
namespace detail {

namespace {

toml::array json_array(const nlohmann::json& j);

toml::table json_table(const nlohmann::json& j);

template <class Sink>
void put_json(const nlohmann::json& v, Sink&& put) {
  switch (v.type()) {
    case nlohmann::json::value_t::object: put(json_table(v)); break;
    case nlohmann::json::value_t::array: put(json_array(v)); break;
    case nlohmann::json::value_t::string: put(v.get<std::string>()); break;
    case nlohmann::json::value_t::boolean: put(v.get<bool>()); break;
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned: put(v.get<std::int64_t>()); break;
    case nlohmann::json::value_t::number_float: put(v.get<double>()); break;
    default: break;  // null has no TOML counterpart; treat as unset
  }
}

toml::array json_array(const nlohmann::json& j) {
  toml::array out;
  for (const auto& v : j) put_json(v, [&](auto&& x) { out.push_back(std::forward<decltype(x)>(x)); });
  return out;
}

toml::table json_table(const nlohmann::json& j) {
  toml::table out;
  for (const auto& [k, v] : j.items()) {
    put_json(v, [&](auto&& x) { out.insert_or_assign(k, std::forward<decltype(x)>(x)); });
  }
  return out;
}

}  // namespace

toml::table parse_toml(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open config " + file.string());
  if (file.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::format, file.string() + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::format, file.string() + ": top level must be an object");
    return json_table(j);
  }
  try {
    return toml::parse(in, file.string());
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    fail(ErrorKind::format, file.string() + ":" + std::to_string(where.line) + ":" +
                                std::to_string(where.column) + ": " +
                                std::string(e.description()));
  }
}

namespace {

[[noreturn]] void bad_type(std::string_view key, const char* expected) {
  fail(ErrorKind::usage, "config key '" + std::string(key) + "' must be " + expected);
}

}  // namespace

std::optional<std::string> get_string(const toml::table& t, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<std::string>()) return v;
  bad_type(key, "a string");
}

std::optional<double> get_double(const toml::table& t, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  // integers are accepted where a float is expected
  if (auto v = n->value<double>()) return v;
  bad_type(key, "a number");
}

std::optional<std::size_t> get_size(const toml::table& t, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  auto v = n->value_exact<std::int64_t>();
  if (!v || *v < 0) bad_type(key, "a non-negative integer");
  return static_cast<std::size_t>(*v);
}

std::optional<bool> get_bool(const toml::table& t, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value_exact<bool>()) return v;
  bad_type(key, "a boolean");
}

std::optional<std::vector<std::string>> get_strings(const toml::table& t, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  const toml::array* arr = n->as_array();
  if (!arr) {
    // a bare string is taken as a one-element list
    if (auto s = n->value<std::string>()) return std::vector<std::string>{*s};
    bad_type(key, "an array of strings");
  }
  std::vector<std::string> out;
  for (const toml::node& item : *arr) {
    auto s = item.value<std::string>();
    if (!s) bad_type(key, "an array of strings");
    out.push_back(*s);
  }
  return out;
}

void apply_train(const toml::table& t, TrainConfig& cfg) {
  if (auto v = get_string(t, "loss")) cfg.loss = parse_loss_kind(*v);
  if (auto v = get_string(t, "optimizer")) {
    if (*v == "adam") cfg.optimizer = OptimizerKind::adam;
    else if (*v == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else fail(ErrorKind::usage, "unknown optimizer '" + *v + "'");
  }
  if (auto v = get_double(t, "learning_rate")) cfg.learning_rate = *v;
  if (auto v = get_size(t, "batch_size")) cfg.batch_size = *v;
  if (auto v = get_size(t, "max_epochs")) cfg.max_epochs = *v;
  if (auto v = get_size(t, "seed")) cfg.seed = *v;
  if (auto v = get_size(t, "kh")) cfg.kh = *v;
  if (auto v = get_size(t, "kw")) cfg.kw = *v;
  if (auto v = get_double(t, "beta1")) cfg.beta1 = *v;
  if (auto v = get_double(t, "beta2")) cfg.beta2 = *v;
  if (auto v = get_double(t, "epsilon")) cfg.epsilon = *v;
  if (auto v = get_double(t, "global_pos_frac")) cfg.global_pos_frac = *v;
}

}  // namespace detail

TrainConfig load_train_config(const fs::path& file) {
  const toml::table root = detail::parse_toml(file);
  TrainConfig cfg;
  if (const toml::table* t = root["train"].as_table()) detail::apply_train(*t, cfg);
  else detail::apply_train(root, cfg);
  cfg.validate();
  return cfg;
}

std::string_view to_string(KernelMode mode) noexcept {
  return mode == KernelMode::adaptive ? "adaptive" : "fixed_1x1";
}

KernelMode parse_kernel_mode(std::string_view name) {
  if (name == "fixed_1x1") return KernelMode::fixed_1x1;
  if (name == "adaptive") return KernelMode::adaptive;
  fail(ErrorKind::usage, "unknown kernel mode '" + std::string(name) + "'");
}

void ExperimentSpec::validate() const {
  if (concepts.empty()) fail(ErrorKind::usage, "experiment lists no concepts");
  if (caches.empty()) fail(ErrorKind::usage, "experiment lists no caches");
  if (categories.empty()) fail(ErrorKind::usage, "experiment lists no size categories");
  if (kernel_modes.empty()) fail(ErrorKind::usage, "experiment lists no kernel modes");
  for (const auto& c : categories) {
    if (c != "all" && c != "far" && c != "middle" && c != "close") {
      fail(ErrorKind::usage, "size category '" + c + "' is not one of all, far, middle, close");
    }
  }
  if (dataset.empty() && annotations.empty()) {
    fail(ErrorKind::usage, "experiment needs either `dataset` or `annotations`");
  }
  if (output.empty()) fail(ErrorKind::usage, "experiment needs an `output` directory");
  if (target_side <= 0) fail(ErrorKind::usage, "target_side must be positive");
  if (folds < 2) fail(ErrorKind::usage, "folds must be at least 2");
  if (test_ids.empty() && !(test_fraction > 0 && test_fraction < 1)) {
    fail(ErrorKind::usage, "test_fraction must lie in (0, 1)");
  }
  train.validate();
}

ExperimentSpec load_experiment(const fs::path& file) {
  using namespace detail;
  const toml::table root = parse_toml(file);
  const fs::path base = file.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  };

  ExperimentSpec spec;
  if (auto v = get_string(root, "annotations")) spec.annotations = resolve(*v);
  if (auto v = get_string(root, "dataset")) spec.dataset = resolve(*v);
  if (auto v = get_string(root, "output")) spec.output = resolve(*v);
  if (auto v = get_size(root, "target_side")) spec.target_side = static_cast<int>(*v);
  if (auto v = get_double(root, "h_standard")) spec.h_standard = *v;
  if (auto v = get_strings(root, "concepts")) {
    for (const auto& name : *v) spec.concepts.push_back(parse_concept(name));
  } else {
    spec.concepts.assign(kAllConcepts.begin(), kAllConcepts.end());
  }
  if (auto v = get_strings(root, "categories")) spec.categories = *v;
  if (auto v = get_strings(root, "kernel_modes")) {
    spec.kernel_modes.clear();
    for (const auto& name : *v) spec.kernel_modes.push_back(parse_kernel_mode(name));
  }
  if (auto v = get_size(root, "folds")) spec.folds = *v;
  if (auto v = get_string(root, "test_ids")) spec.test_ids = resolve(*v);
  if (auto v = get_double(root, "test_fraction")) spec.test_fraction = *v;
  if (auto v = get_bool(root, "parallel_folds")) spec.parallel_folds = *v;
  if (const toml::table* t = root["train"].as_table()) apply_train(*t, spec.train);

  if (const toml::node* n = root.get("caches")) {
    const toml::array* arr = n->as_array();
    if (!arr) fail(ErrorKind::usage, "`caches` must be an array of tables");
    for (const toml::node& item : *arr) {
      const toml::table* t = item.as_table();
      if (!t) fail(ErrorKind::usage, "`caches` must be an array of tables");
      CacheRef ref;
      auto path = get_string(*t, "path");
      if (!path) fail(ErrorKind::usage, "cache entry without `path`");
      ref.path = resolve(*path);
      ref.net = get_string(*t, "net").value_or("net");
      ref.layer = get_string(*t, "layer").value_or(ref.path.filename().string());
      spec.caches.push_back(std::move(ref));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace partprobe::cli
