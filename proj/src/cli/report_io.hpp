#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace partprobe::cli::detail {

/// Joins fields with commas; fields containing a comma, quote or newline are
/// quoted.
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::string> split_csv_row(std::string_view line);

/// Header plus rows of a CSV file. Format error on ragged rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Column index or npos.
  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written report.
void write_text(const std::filesystem::path& path, const std::string& content);

/// One line on stderr, prefixed with the tool name.
void log_line(const std::string& message);
void set_quiet(bool quiet);

}  // namespace partprobe::cli::detail
