#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace intattn {

enum class ReportFormat { kCsv, kJson };

ReportFormat parse_report_format(std::string_view s);

using Cell = std::variant<std::int64_t, double, std::string>;

/// Flat table: every row has one cell per column. Serialized as CSV with a
/// header row, or as a JSON array of objects sharing the same keys. Reals
/// are written with 17 significant digits so they parse back exactly.
struct Report {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  // Emitted as '#' lines ahead of the CSV header; dropped in JSON.
  std::vector<std::string> notes;

  void add_row(std::vector<Cell> row);
  std::size_t column(std::string_view name) const;
  const Cell& at(std::size_t row, std::string_view name) const;
  double real(std::size_t row, std::string_view name) const;
  std::int64_t integer(std::size_t row, std::string_view name) const;
};

void write_csv(const Report& r, std::ostream& out);
void write_json(const Report& r, std::ostream& out);
void write_report(const Report& r, ReportFormat format, std::ostream& out);
void write_report(const Report& r, ReportFormat format,
                  const std::filesystem::path& path);

// Readers exist so emitted files can be checked; integer cells come back as
// int64 and other numbers as double.
Report parse_csv(std::istream& in);
Report parse_json(std::istream& in);

}  // namespace intattn
