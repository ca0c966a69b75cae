#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "egw/measures.hpp"
#include "egw/solvers.hpp"

namespace egw {

/// Numeric CSV with optional header row and '#' comment lines.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

CsvTable read_csv(const std::string& path);

/// One point per row. A header whose last column is `w` marks that column as
/// weights (normalized to sum 1); otherwise weights are uniform.
DiscreteMeasure read_points(const std::string& path);
Matrix read_matrix(const std::string& path);
/// Landmark correspondences, one `i,j` pair per row.
std::vector<std::pair<Index, Index>> read_pairs(const std::string& path);

/// `comment` lines are written first, each prefixed with "# ".
void write_matrix(const std::string& path, const Matrix& m, const std::vector<std::string>& comment,
                  const std::vector<std::string>& header = {});
/// Triplets i,j,value, skipping entries below `threshold`.
void write_triplets(const std::string& path, const Matrix& pi, const std::vector<std::string>& comment,
                    double threshold = 1e-12);
/// Same for a plan held through potentials, reconstructed one row at a time.
void write_triplets(const std::string& path, const ImplicitCoupling& pi, const std::vector<std::string>& comment,
                    double threshold = 1e-12);
void write_trace(const std::string& path, const SolveTrace& trace,
                 const std::vector<std::string>& comment);
void write_trace(std::ostream& os, const SolveTrace& trace);

}  // namespace egw
