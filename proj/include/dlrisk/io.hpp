#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dlrisk::io {

/// Seconds since 1970-01-01T00:00:00Z.
using Timestamp = std::int64_t;

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_iso8601(Timestamp t);

/// Parses the format produced by format_iso8601; throws SchemaError otherwise.
Timestamp parse_iso8601(std::string_view text);

Timestamp make_timestamp(int year, int month, int day, int hour = 0, int minute = 0, int second = 0);

/// Hour of day (UTC) in [0, 24).
int hour_of_day(Timestamp t);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

/// Minimal CSV: comma separated, no quoting (every field written by this
/// project is quote-free).
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a CSV file; every row must have the header's column count.
CsvTable read_csv(const std::filesystem::path& path);

/// Validates that the header equals `expected`, throwing SchemaError otherwise.
void expect_header(const CsvTable& table, const std::vector<std::string>& expected,
                   std::string_view what);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

std::string join(const std::vector<std::string>& items, std::string_view sep);

}  // namespace dlrisk::io
