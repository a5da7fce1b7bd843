#pragma once

// Plain-text matrix format:
//
//   dim <n>
//   <n rows of n whitespace-separated reals>
//   [flags self_adjoint psd]
//
// Values are written with 17 significant digits so a write/read cycle is
// bit-exact.

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "dsm/errors.hpp"
#include "dsm/linalg.hpp"

namespace dsm {

namespace detail {

inline bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

inline std::string at_line(const std::string& source, int line_no) {
  return source + ":" + std::to_string(line_no) + ": ";
}

} // namespace detail

inline DenseOperator read_matrix(std::istream& in, const std::string& source = "<matrix>") {
  std::string line;
  int line_no = 0;
  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(source + ": empty matrix file");

  std::istringstream header(line);
  std::string keyword;
  long long n = -1;
  header >> keyword >> n;
  if (keyword != "dim" || header.fail() || n <= 0)
    throw ParseError(detail::at_line(source, line_no) + "expected 'dim <n>' with n > 0");

  const auto dim = static_cast<std::size_t>(n);
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (!detail::next_content_line(in, line, line_no))
      throw ParseError(source + ": expected " + std::to_string(dim) + " matrix rows, found " + std::to_string(i));
    std::istringstream row(line);
    for (std::size_t j = 0; j < dim; ++j) {
      std::string token;
      if (!(row >> token))
        throw ParseError(detail::at_line(source, line_no) + "row " + std::to_string(i) + " has " +
                         std::to_string(j) + " entries, expected " + std::to_string(dim));
      try {
        std::size_t used = 0;
        m(i, j) = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(detail::at_line(source, line_no) + "bad number '" + token + "'");
      }
    }
    std::string extra;
    if (row >> extra) throw ParseError(detail::at_line(source, line_no) + "too many entries in row");
  }

  OperatorFlags flags;
  if (detail::next_content_line(in, line, line_no)) {
    std::istringstream fl(line);
    fl >> keyword;
    if (keyword != "flags") throw ParseError(detail::at_line(source, line_no) + "expected 'flags ...' or end of file");
    std::string f;
    while (fl >> f) {
      if (f == "self_adjoint") flags.self_adjoint = true;
      else if (f == "psd") flags.psd_claimed = true;
      else throw ParseError(detail::at_line(source, line_no) + "unknown flag '" + f + "'");
    }
    if (detail::next_content_line(in, line, line_no))
      throw ParseError(detail::at_line(source, line_no) + "unexpected content after flags");
  }
  if (!m.all_finite()) throw ParseError(source + ": non-finite matrix entry");
  return DenseOperator(std::move(m), flags);
}

inline DenseOperator read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open matrix file");
  return read_matrix(in, path);
}

inline void write_matrix(std::ostream& out, const DenseOperator& op) {
  const auto& m = op.matrix();
  out << "dim " << m.rows() << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << m(i, j);
    }
    out << '\n';
  }
  if (op.flags().self_adjoint || op.flags().psd_claimed) {
    out << "flags";
    if (op.flags().self_adjoint) out << " self_adjoint";
    if (op.flags().psd_claimed) out << " psd";
    out << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const DenseOperator& op) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  write_matrix(out, op);
}

} // namespace dsm
