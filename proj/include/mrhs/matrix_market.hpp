#pragma once

// Matrix Market reader and writer. Supported: coordinate and array storage;
// real, complex, integer and pattern fields; general, symmetric, hermitian and
// skew-symmetric symmetry. Symmetric storage is expanded on read.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrhs/operator.hpp"

namespace mrhs::mm {

class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& source, long line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

struct MarketMatrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<Eigen::Triplet<Scalar>> entries;  // expanded, 0-based

  SparseMatrix sparse() const {
    SparseMatrix A(rows, cols);
    A.setFromTriplets(entries.begin(), entries.end());
    return A;
  }
  Matrix dense() const { return Matrix(sparse()); }
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

inline MarketMatrix read(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw parse_error(source, 1, "empty input");
  ++lineno;

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw parse_error(source, lineno, "missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw parse_error(source, lineno, "unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array")
    throw parse_error(source, lineno, "unsupported format '" + format + "'");
  if (field != "real" && field != "complex" && field != "integer" && field != "pattern")
    throw parse_error(source, lineno, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "hermitian" && symmetry != "skew-symmetric")
    throw parse_error(source, lineno, "unsupported symmetry '" + symmetry + "'");
  if (format == "array" && field == "pattern") throw parse_error(source, lineno, "pattern field needs coordinate format");
  if (symmetry == "hermitian" && field != "complex") throw parse_error(source, lineno, "hermitian needs complex field");

  const bool coordinate = format == "coordinate";
  const bool complex = field == "complex";

  // Size line, after comments.
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (detail::blank(line)) continue;
    break;
  }
  if (!in && line.empty()) throw parse_error(source, lineno, "missing size line");

  MarketMatrix out;
  long long declared = 0;
  {
    std::istringstream size(line);
    long long r = -1, c = -1;
    size >> r >> c;
    if (coordinate) size >> declared;
    if (!size || r < 0 || c < 0 || declared < 0) throw parse_error(source, lineno, "malformed size line");
    std::string extra;
    if (size >> extra) throw parse_error(source, lineno, "unexpected token '" + extra + "' on size line");
    out.rows = r;
    out.cols = c;
  }
  if (symmetry != "general" && out.rows != out.cols) throw parse_error(source, lineno, symmetry + " matrix is not square");

  const bool symmetric = symmetry != "general";
  if (!coordinate) {
    declared = symmetric ? out.rows * (out.rows + 1) / 2 - (symmetry == "skew-symmetric" ? out.rows : 0)
                         : out.rows * out.cols;
  }

  auto store = [&](Index i, Index j, Scalar v) {
    out.entries.emplace_back(i, j, v);
    if (!symmetric || i == j) return;
    if (symmetry == "symmetric") out.entries.emplace_back(j, i, v);
    else if (symmetry == "hermitian") out.entries.emplace_back(j, i, std::conj(v));
    else out.entries.emplace_back(j, i, -v);
  };

  // Position of the next array entry (column-major, lower triangle when symmetric).
  Index ai = 0, aj = 0;
  if (!coordinate && symmetry == "skew-symmetric") ai = 1;
  auto advance = [&]() {
    ++ai;
    if (ai >= out.rows) {
      ++aj;
      ai = symmetric ? aj + (symmetry == "skew-symmetric" ? 1 : 0) : 0;
    }
  };

  long long seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line) || line[0] == '%') continue;
    if (seen >= declared) throw parse_error(source, lineno, "more entries than the " + std::to_string(declared) + " declared");
    std::istringstream entry(line);
    Index i = 0, j = 0;
    if (coordinate) {
      long long ri = 0, rj = 0;
      entry >> ri >> rj;
      if (!entry) throw parse_error(source, lineno, "malformed entry indices");
      if (ri < 1 || ri > out.rows || rj < 1 || rj > out.cols)
        throw parse_error(source, lineno, "entry index (" + std::to_string(ri) + ", " + std::to_string(rj) + ") out of range");
      i = ri - 1;
      j = rj - 1;
      if (symmetric && i < j) throw parse_error(source, lineno, "entry above the diagonal in " + symmetry + " storage");
      if (symmetry == "skew-symmetric" && i == j) throw parse_error(source, lineno, "diagonal entry in skew-symmetric storage");
    } else {
      i = ai;
      j = aj;
    }
    Scalar v(1, 0);
    if (field != "pattern") {
      Real re = 0, im = 0;
      entry >> re;
      if (complex) entry >> im;
      if (!entry) throw parse_error(source, lineno, "malformed entry value");
      v = Scalar(re, im);
    }
    std::string extra;
    if (entry >> extra) throw parse_error(source, lineno, "unexpected token '" + extra + "'");
    store(i, j, v);
    if (!coordinate) advance();
    ++seen;
  }
  if (seen < declared)
    throw parse_error(source, lineno, "expected " + std::to_string(declared) + " entries, found " + std::to_string(seen));
  return out;
}

inline MarketMatrix read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read(in, path);
}

/// Square matrix as an operator.
inline LinearOperator load_operator(const std::string& path) {
  const auto m = read_file(path);
  if (m.rows != m.cols)
    throw std::runtime_error(path + ": matrix is " + std::to_string(m.rows) + " x " + std::to_string(m.cols) +
                             ", a square matrix is required");
  return sparse_operator(m.sparse());
}

/// An N x 1 matrix (either format) as a vector.
inline Vector load_vector(const std::string& path) {
  const auto m = read_file(path);
  if (m.cols != 1) throw std::runtime_error(path + ": expected a single column, found " + std::to_string(m.cols));
  return m.dense().col(0);
}

/// Coordinate complex general, 17 significant digits, stored entries only.
inline void write(std::ostream& out, const SparseMatrix& A) {
  out << "%%MatrixMarket matrix coordinate complex general\n";
  out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  char buf[96];
  for (Index r = 0; r < A.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g", it.value().real(), it.value().imag());
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << buf << '\n';
    }
  }
}

/// Array complex general (column-major).
inline void write(std::ostream& out, const Matrix& A) {
  out << "%%MatrixMarket matrix array complex general\n";
  out << A.rows() << ' ' << A.cols() << '\n';
  char buf[96];
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = 0; i < A.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", A(i, j).real(), A(i, j).imag());
      out << buf;
    }
}

template <class M>
void write_file(const std::string& path, const M& A) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out, A);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mrhs::mm
