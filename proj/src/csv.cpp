#include "msl/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "msl/error.hpp"

namespace msl {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::validation,
         "row " + std::to_string(row) + ", column " + std::to_string(col) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

PathPanel read_panel_csv(const std::filesystem::path& path, bool scale_max) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::validation, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::validation, path.string() + ": empty file");
  const auto header = split(line);
  if (header.size() < 2 || trim(header[0]) != "t") {
    fail(ErrorKind::validation, path.string() + ": header must start with 't' followed by at least one path column");
  }
  const std::size_t d = header.size() - 1;
  std::vector<Path> paths(d);
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::validation, path.string() + ": row " + std::to_string(row) + " has " +
                                      std::to_string(cells.size()) + " cells, expected " +
                                      std::to_string(header.size()));
    }
    const double t = parse_cell(cells[0], row, 1);
    if (!times.empty() && !(t > times.back())) {
      fail(ErrorKind::validation, path.string() + ": row " + std::to_string(row) + ": times must increase");
    }
    times.push_back(t);
    for (std::size_t i = 0; i < d; ++i) {
      const double v = parse_cell(cells[i + 1], row, i + 2);
      if (!(v > 0.0)) {
        fail(ErrorKind::validation, path.string() + ": row " + std::to_string(row) + ", column " +
                                        std::to_string(i + 2) + " (" + trim(header[i + 1]) +
                                        "): values must be positive");
      }
      paths[i].values.push_back(v);
    }
  }
  if (times.size() < 2) fail(ErrorKind::validation, path.string() + ": need at least two rows of data");
  for (auto& p : paths) p.times = times;
  PathPanel panel(std::move(paths));
  return scale_max ? panel.scaled_by_max() : panel;
}

void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size() || columns.empty()) fail(ErrorKind::shape, "write_columns_csv: header mismatch");
  const std::size_t rows = columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) fail(ErrorKind::shape, "write_columns_csv: ragged columns");
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::validation, "cannot write " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << format_double(columns[k][r]);
    out << '\n';
  }
}

void write_panel_csv(const std::filesystem::path& path, const PathPanel& panel) {
  std::vector<std::string> header{"t"};
  std::vector<std::vector<double>> cols{panel.common_grid()};
  for (std::size_t i = 0; i < panel.size(); ++i) {
    header.push_back("path" + std::to_string(i + 1));
    cols.push_back(panel[i].values);
  }
  write_columns_csv(path, header, cols);
}

}  // namespace msl
