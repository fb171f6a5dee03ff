#include "intattn/report.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "intattn/error.hpp"

namespace intattn {
namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string format_cell(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
  return std::get<std::string>(c);
}

Cell parse_cell(const std::string& s) {
  std::int64_t i = 0;
  const char* end = s.data() + s.size();
  if (auto [p, ec] = std::from_chars(s.data(), end, i);
      ec == std::errc() && p == end && !s.empty()) {
    return i;
  }
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(s.data(), end, d);
      ec == std::errc() && p == end && !s.empty()) {
    return d;
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw Error(Errc::kUsage, "unknown output format '" + std::string(s) + "'");
}

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw Error(Errc::kShape, "report row has " + std::to_string(row.size()) +
                                  " cells, expected " +
                                  std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t Report::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error(Errc::kUsage, "no report column '" + std::string(name) + "'");
}

const Cell& Report::at(std::size_t row, std::string_view name) const {
  return rows.at(row).at(column(name));
}

double Report::real(std::size_t row, std::string_view name) const {
  const auto& c = at(row, name);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}

std::int64_t Report::integer(std::size_t row, std::string_view name) const {
  return std::get<std::int64_t>(at(row, name));
}

void write_csv(const Report& r, std::ostream& out) {
  for (const auto& n : r.notes) out << "# " << n << '\n';
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    out << (i ? "," : "") << r.columns[i];
  }
  out << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << format_cell(row[i]);
    }
    out << '\n';
  }
}

void write_json(const Report& r, std::ostream& out) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit([&](const auto& v) { obj[r.columns[i]] = v; }, row[i]);
    }
    arr.push_back(std::move(obj));
  }
  out << arr.dump(2) << '\n';
}

void write_report(const Report& r, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::kCsv) {
    write_csv(r, out);
  } else {
    write_json(r, out);
  }
}

void write_report(const Report& r, ReportFormat format,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot open " + path.string());
  write_report(r, format, out);
  if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
}

Report parse_csv(std::istream& in) {
  Report r;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      r.notes.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    auto cells = split(line);
    if (header) {
      r.columns = std::move(cells);
      header = false;
      continue;
    }
    std::vector<Cell> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_cell(c));
    r.add_row(std::move(row));
  }
  return r;
}

Report parse_json(std::istream& in) {
  const auto doc = nlohmann::ordered_json::parse(in);
  Report r;
  for (const auto& obj : doc) {
    if (r.columns.empty()) {
      for (const auto& [key, _] : obj.items()) r.columns.push_back(key);
    }
    std::vector<Cell> row;
    for (const auto& key : r.columns) {
      const auto& v = obj.at(key);
      if (v.is_number_integer()) {
        row.emplace_back(v.get<std::int64_t>());
      } else if (v.is_number()) {
        row.emplace_back(v.get<double>());
      } else {
        row.emplace_back(v.get<std::string>());
      }
    }
    r.add_row(std::move(row));
  }
  return r;
}

}  // namespace intattn
