#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace kle::io {

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

/// Simple numeric table with named columns, written as CSV.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_table_csv(const std::string& path, const Table& table);

/// Legacy ASCII VTK structured grid. `dims` are the per-direction point
/// counts (missing directions padded to 1), `points` holds one grid point
/// per row (up to 3 columns, padded with zeros), `fields` one named scalar
/// array per entry.
struct ScalarField {
  std::string name;
  Eigen::VectorXd values;
};

void write_vtk_structured_grid(const std::string& path,
                               const std::vector<int>& dims,
                               const Eigen::MatrixXd& points,
                               const std::vector<ScalarField>& fields);

} // namespace kle::io
