#pragma once

// Delimiter-separated text tables with a header row. Internal to the
// library; the bundle reader and the solution/report writers share it.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refplan::detail {

struct Table {
  std::filesystem::path file;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row
  std::vector<std::string> comments;  // text after '#' of comment lines, when enabled

  std::optional<std::size_t> column(std::string_view name) const;
  /// Column index; throws ParseError on the header line when absent.
  std::size_t require(std::string_view name) const;
};

/// With `comments` set, lines starting with '#' are collected instead of parsed.
Table read_table(const std::filesystem::path& file, char delim = ',', bool comments = false);

/// Writes through a temporary file and renames it into place.
void write_table(const std::filesystem::path& file, const std::vector<std::string>& columns,
                 const std::vector<std::vector<std::string>>& rows, char delim = ',',
                 const std::vector<std::string>& comments = {});

void write_text_atomic(const std::filesystem::path& file, const std::string& content);

double parse_number(std::string_view text, const std::filesystem::path& file, std::size_t line);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

std::string trim(std::string_view s);

}  // namespace refplan::detail
