#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "adjmm/estimate.hpp"
#include "adjmm/operator.hpp"

namespace adjmm::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw FormatError("format_double: conversion failed");
  return {buf, ptr};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = line.find(',');
    out.push_back(trim(line.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no) {
  T value{};
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    std::ostringstream os;
    os << "line " << line_no << ": cannot parse '" << tok << "'";
    throw FormatError(os.str());
  }
  return value;
}

}  // namespace detail

/// Matrix CSV: first line "m,d", then m lines of d comma-separated reals.
inline DenseMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw FormatError("matrix csv: empty input");
  const auto header = detail::split(line);
  if (header.size() != 2) throw FormatError("matrix csv: header must be 'm,d'");
  const auto m = detail::parse_number<std::size_t>(header[0], line_no);
  const auto d = detail::parse_number<std::size_t>(header[1], line_no);
  if (m == 0 || d == 0) throw FormatError("matrix csv: dimensions must be positive");
  Vec entries;
  entries.reserve(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    if (!next_line()) throw FormatError("matrix csv: expected " + std::to_string(m) + " rows");
    const auto toks = detail::split(line);
    if (toks.size() != d) {
      std::ostringstream os;
      os << "matrix csv: line " << line_no << " has " << toks.size() << " values, expected " << d;
      throw FormatError(os.str());
    }
    for (auto t : toks) entries.push_back(detail::parse_number<double>(t, line_no));
  }
  if (next_line()) throw FormatError("matrix csv: trailing data after " + std::to_string(m) + " rows");
  return DenseMatrix(m, d, std::move(entries));
}

inline DenseMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open matrix file '" + path + "'");
  try {
    return read_matrix_csv(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_matrix_csv(std::ostream& out, const DenseMatrix& M) {
  out << M.rows() << ',' << M.cols() << '\n';
  for (std::size_t i = 0; i < M.rows(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
}

inline constexpr std::string_view kTraceHeader = "iter,objective,a,b,c,d,tau,xi,residual,n_forward,n_adjoint";

inline void write_trace_row(std::ostream& out, const TraceRecord& r) {
  auto opt = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << format_double(*v);
  };
  out << r.iter << ',' << format_double(r.objective);
  opt(r.a);
  opt(r.b);
  opt(r.c);
  opt(r.d);
  opt(r.tau);
  opt(r.xi);
  opt(r.residual);
  out << ',' << r.n_forward << ',' << r.n_adjoint << '\n';
}

inline void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) write_trace_row(out, r);
}

}  // namespace adjmm::io
