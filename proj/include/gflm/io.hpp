#pragma once

// Plain-text numeric I/O. CSV files hold one curve (or one value) per row;
// '#' starts a comment line. A file may begin with a header row: either column
// names, or (for curves) the grid points, optionally after a non-numeric label cell.

#include "gflm/funcspace.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gflm {

struct CsvTable {
  std::optional<std::vector<double>> header;  ///< grid points from a header row
  std::vector<std::string> names;             ///< column names from an all-text header row
  Mat values;
};

CsvTable read_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv_file(const std::string& path);

/// Rows are curves; the grid comes from the header when present, otherwise a
/// uniform grid with one point per column.
struct CurveMatrix {
  Grid grid{2};
  Mat curves;
};
CurveMatrix read_curves(const std::string& path);

/// Every number in the file, row-major.
Vec read_vector(const std::string& path);

/// A single curve: one row, or one column, on a uniform grid or with a header.
GridFunction read_curve(const std::string& path);

CurveDataset read_dataset(const std::string& curves_path, const std::string& responses_path);

/// Shortest round-trip representation.
std::string format_double(double v);

void write_csv(std::ostream& out, const Mat& values, const std::vector<std::string>& header = {});
void write_csv_file(const std::string& path, const Mat& values, const std::vector<std::string>& header = {});

/// Curves under a header row "grid,t_1,...,t_T" so that read_curves recovers the grid.
void write_curves(const std::string& path, const Grid& grid, const Mat& curves);
void write_vector(const std::string& path, const Vec& v);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace gflm
