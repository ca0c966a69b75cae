#include "egw/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace egw {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno == 0;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  return os;
}

void write_comment(std::ostream& os, const std::vector<std::string>& comment) {
  for (const auto& c : comment) os << "# " << c << '\n';
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open '" + path + "'");
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto cells = split(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    for (size_t k = 0; k < cells.size(); ++k) numeric = numeric && parse_double(cells[k], row[k]);
    if (!numeric) {
      if (rows.empty() && table.header.empty()) {
        table.header = cells;
        continue;
      }
      throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric entry");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": inconsistent number of columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("'" + path + "' contains no data rows");
  if (!table.header.empty() && table.header.size() != rows.front().size()) {
    throw InputError("'" + path + "': header and data have different widths");
  }
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) table.values(i, j) = rows[i][j];
  }
  if (!table.values.allFinite()) throw InputError("'" + path + "' contains non-finite values");
  return table;
}

DiscreteMeasure read_points(const std::string& path) {
  CsvTable t = read_csv(path);
  const bool weighted = !t.header.empty() && t.header.back() == "w";
  if (!weighted) return DiscreteMeasure(std::move(t.values));
  if (t.values.cols() < 2) throw InputError("'" + path + "': weights given without coordinates");
  Vector w = t.values.col(t.values.cols() - 1);
  if ((w.array() <= 0.0).any()) throw InputError("'" + path + "': weights must be positive");
  w /= w.sum();
  Matrix pts = t.values.leftCols(t.values.cols() - 1);
  return DiscreteMeasure(std::move(pts), std::move(w));
}

Matrix read_matrix(const std::string& path) { return read_csv(path).values; }

std::vector<std::pair<Index, Index>> read_pairs(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.values.cols() != 2) throw InputError("'" + path + "': landmark file needs two columns");
  std::vector<std::pair<Index, Index>> out;
  for (Index r = 0; r < t.values.rows(); ++r) {
    const double i = t.values(r, 0);
    const double j = t.values(r, 1);
    if (i != std::floor(i) || j != std::floor(j) || i < 0 || j < 0) {
      throw InputError("'" + path + "': landmark indices must be non-negative integers");
    }
    out.emplace_back(static_cast<Index>(i), static_cast<Index>(j));
  }
  return out;
}

void write_matrix(const std::string& path, const Matrix& m, const std::vector<std::string>& comment,
                  const std::vector<std::string>& header) {
  auto os = open_out(path);
  write_comment(os, comment);
  for (size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  if (!header.empty()) os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << '\n';
  }
}

void write_triplets(const std::string& path, const Matrix& pi, const std::vector<std::string>& comment,
                    double threshold) {
  auto os = open_out(path);
  write_comment(os, comment);
  os << "i,j,value\n";
  for (Index i = 0; i < pi.rows(); ++i) {
    for (Index j = 0; j < pi.cols(); ++j) {
      if (pi(i, j) >= threshold) os << i << ',' << j << ',' << pi(i, j) << '\n';
    }
  }
}

void write_triplets(const std::string& path, const ImplicitCoupling& pi, const std::vector<std::string>& comment,
                    double threshold) {
  auto os = open_out(path);
  write_comment(os, comment);
  os << "i,j,value\n";
  std::vector<double> row(pi.cols());
  std::vector<double> scratch(pi.cols());
  for (Index i = 0; i < pi.rows(); ++i) {
    pi.row(i, row.data(), scratch.data());
    for (Index j = 0; j < pi.cols(); ++j) {
      if (!std::isfinite(row[j])) throw SolverError("non-finite coupling entry at (" + std::to_string(i) + ", " +
                                                    std::to_string(j) + ")");
      if (row[j] >= threshold) os << i << ',' << j << ',' << row[j] << '\n';
    }
  }
}

void write_trace(std::ostream& os, const SolveTrace& trace) {
  os << "step,objective,gamma_delta,marginal_err,inner_iters,elapsed_s\n";
  for (const auto& r : trace.rows) {
    os << r.step << ',' << r.objective << ',' << r.gamma_delta << ',' << r.marginal_err << ','
       << r.inner_iters << ',' << r.elapsed_s << '\n';
  }
}

void write_trace(const std::string& path, const SolveTrace& trace,
                 const std::vector<std::string>& comment) {
  auto os = open_out(path);
  write_comment(os, comment);
  write_trace(os, trace);
}

}  // namespace egw
