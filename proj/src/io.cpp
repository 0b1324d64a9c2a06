#include "gflm/io.hpp"

#include "gflm/errors.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace gflm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cells = split(view);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (const auto c : cells) {
      const auto v = parse_number(c);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      // Only the first data row may be a header: column names, or an optional
      // label followed by grid points.
      if (!rows.empty() || t.header || !t.names.empty())
        throw InvalidInput(source + ":" + std::to_string(lineno) + ": non-numeric cell");
      bool all_names = true;
      for (const auto c : cells) all_names = all_names && !parse_number(c) && !trim(c).empty();
      if (all_names && cells.size() > 1) {
        for (const auto c : cells) t.names.emplace_back(trim(c));
        continue;
      }
      std::vector<double> pts;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto v = parse_number(cells[i]);
        if (!v) {
          if (i == 0) continue;
          throw InvalidInput(source + ":" + std::to_string(lineno) + ": malformed header cell '" +
                             std::string(trim(cells[i])) + "'");
        }
        pts.push_back(*v);
      }
      t.header = std::move(pts);
      continue;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInput(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                         " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput(source + ": no numeric rows");
  if (!t.names.empty() && t.names.size() != rows.front().size())
    throw InvalidInput(source + ": " + std::to_string(t.names.size()) + " column names for " +
                       std::to_string(rows.front().size()) + " columns");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  auto in = open_in(path);
  return read_csv(in, path);
}

namespace {

Grid grid_for(const CsvTable& t, Eigen::Index columns, const std::string& path) {
  if (t.header) {
    if (static_cast<Eigen::Index>(t.header->size()) != columns)
      throw GridMismatch(path + ": header has " + std::to_string(t.header->size()) + " grid points but rows have " +
                         std::to_string(columns) + " values");
    return Grid::from_points(*t.header);
  }
  if (columns < 2) throw InvalidInput(path + ": a curve needs at least two grid points");
  return Grid(static_cast<std::size_t>(columns));
}

}  // namespace

CurveMatrix read_curves(const std::string& path) {
  CsvTable t = read_csv_file(path);
  CurveMatrix c{grid_for(t, t.values.cols(), path), std::move(t.values)};
  return c;
}

Vec read_vector(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  if (t.header) throw InvalidInput(path + ": unexpected header row in a numeric vector file");
  const Mat rm = t.values.transpose();  // column-major storage of the transpose is row-major order
  return Eigen::Map<const Vec>(rm.data(), rm.size());
}

GridFunction read_curve(const std::string& path) {
  CsvTable t = read_csv_file(path);
  Vec v;
  if (t.values.rows() == 1) {
    v = t.values.row(0).transpose();
  } else if (t.values.cols() == 1 && !t.header) {
    v = t.values.col(0);
  } else {
    throw InvalidInput(path + ": expected a single curve (one row or one column)");
  }
  Grid g = grid_for(t, v.size(), path);
  return GridFunction(std::move(g), std::move(v));
}

CurveDataset read_dataset(const std::string& curves_path, const std::string& responses_path) {
  CurveMatrix c = read_curves(curves_path);
  Vec y = read_vector(responses_path);
  if (y.size() != c.curves.rows())
    throw InvalidInput("responses file has " + std::to_string(y.size()) + " values for " +
                       std::to_string(c.curves.rows()) + " curves");
  return CurveDataset(c.grid, std::move(c.curves), std::move(y));
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericalError("number formatting failed");
  return std::string(buf.data(), ptr);
}

void write_csv(std::ostream& out, const Mat& values, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Mat& values, const std::vector<std::string>& header) {
  auto out = open_out(path);
  write_csv(out, values, header);
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

void write_curves(const std::string& path, const Grid& grid, const Mat& curves) {
  std::vector<std::string> header{"grid"};
  header.reserve(grid.size() + 1);
  for (std::size_t i = 0; i < grid.size(); ++i) header.push_back(format_double(grid[i]));
  write_csv_file(path, curves, header);
}

void write_vector(const std::string& path, const Vec& v) { write_csv_file(path, Mat(v)); }

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

}  // namespace gflm
