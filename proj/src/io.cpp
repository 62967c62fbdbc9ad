#include "kle/io.hpp"

#include <cstdio>
#include <fstream>

#include "kle/errors.hpp"

namespace kle::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_table_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("csv: cannot write " + path);
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

void write_vtk_structured_grid(const std::string& path,
                               const std::vector<int>& dims,
                               const Eigen::MatrixXd& points,
                               const std::vector<ScalarField>& fields) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("vtk: cannot write " + path);
  int d3[3] = {1, 1, 1};
  for (size_t k = 0; k < dims.size() && k < 3; ++k) d3[k] = dims[k];
  const std::int64_t n = static_cast<std::int64_t>(d3[0]) * d3[1] * d3[2];
  if (points.rows() != n)
    throw DimensionError("vtk: point count does not match dimensions");

  out << "# vtk DataFile Version 3.0\n";
  out << "klex structured grid\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_GRID\n";
  out << "DIMENSIONS " << d3[0] << " " << d3[1] << " " << d3[2] << "\n";
  out << "POINTS " << n << " double\n";
  for (std::int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double v = k < points.cols() ? points(i, k) : 0.0;
      out << (k ? " " : "") << format_double(v);
    }
    out << "\n";
  }
  if (!fields.empty()) {
    out << "POINT_DATA " << n << "\n";
    for (const auto& f : fields) {
      if (f.values.size() != n)
        throw DimensionError("vtk: field '" + f.name + "' length mismatch");
      out << "SCALARS " << f.name << " double 1\n";
      out << "LOOKUP_TABLE default\n";
      for (std::int64_t i = 0; i < n; ++i)
        out << format_double(f.values[i]) << "\n";
    }
  }
}

} // namespace kle::io
