#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "partprobe/train.hpp"

namespace partprobe::cli::detail {

/// Format error (with the parser's location) on malformed TOML, io error if
/// the file cannot be opened. A `.json` file is read as JSON with the same
/// key layout.
toml::table parse_toml(const std::filesystem::path& file);

std::optional<std::string> get_string(const toml::table& t, std::string_view key);
std::optional<double> get_double(const toml::table& t, std::string_view key);
/// Usage error for negative values.
std::optional<std::size_t> get_size(const toml::table& t, std::string_view key);
std::optional<bool> get_bool(const toml::table& t, std::string_view key);
std::optional<std::vector<std::string>> get_strings(const toml::table& t, std::string_view key);

/// Overwrites the fields of cfg present in `t`.
void apply_train(const toml::table& t, TrainConfig& cfg);

}  // namespace partprobe::cli::detail
