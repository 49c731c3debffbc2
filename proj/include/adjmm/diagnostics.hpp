#pragma once

// Convergence diagnostics. Everything here needs (A - V) as a dense matrix:
// (A-V)^*(A-V) v and (A-V)^* u are not computable from a forward oracle for A
// and an adjoint oracle for V alone, so these are test-bench quantities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adjmm/estimate.hpp"
#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/sampling.hpp"

namespace adjmm {

/// || M^T M v - a^2 v || with a the iterate's objective and M = A - V.
inline double eigen_residual(const DenseMatrix& diff, const IteratePair& it) {
  const Vec Mv = dense_forward(diff, it.v);
  Vec r = dense_adjoint(diff, Mv);
  axpy(-it.objective * it.objective, it.v, r);
  return norm2(r);
}

/// lambda = ||M^T u|| * ||M v||.
inline double singular_value_proxy(const DenseMatrix& diff, const IteratePair& it) {
  return norm2(dense_adjoint(diff, it.u)) * norm2(dense_forward(diff, it.v));
}

struct AngleDefect {
  /// 1 - <u, Mv/||Mv||>^2
  double left = 0.0;
  /// 1 - <v, M^T u/||M^T u||>^2
  double right = 0.0;
  /// Mv or M^T u vanished; the defects are undefined.
  bool kernel_iterate = false;

  double sum() const { return left + right; }
};

inline AngleDefect angle_defect(const DenseMatrix& diff, const IteratePair& it) {
  const Vec Mv = dense_forward(diff, it.v);
  const Vec Mtu = dense_adjoint(diff, it.u);
  const double nMv = norm2(Mv), nMtu = norm2(Mtu);
  if (nMv == 0.0 || nMtu == 0.0) return {0.0, 0.0, true};
  const double cu = dot(it.u, Mv) / nMv;
  const double cv = dot(it.v, Mtu) / nMtu;
  return {std::clamp(1.0 - cu * cu, 0.0, 1.0), std::clamp(1.0 - cv * cv, 0.0, 1.0), false};
}

/// Trace observer that fills the residual column from a dense difference matrix.
inline TraceObserver residual_observer(DenseMatrix diff) {
  return [diff = std::move(diff)](const IteratePair& it, TraceRecord& row) { row.residual = eigen_residual(diff, it); };
}

inline std::optional<double> trace_field(const TraceRecord& r, std::string_view field) {
  if (field == "objective") return r.objective;
  if (field == "a") return r.a;
  if (field == "b") return r.b;
  if (field == "c") return r.c;
  if (field == "d") return r.d;
  if (field == "tau") return r.tau;
  if (field == "xi") return r.xi;
  if (field == "residual") return r.residual;
  if (field == "bc_sum") {
    if (!r.b || !r.c) return std::nullopt;
    return std::abs(*r.b) + std::abs(*r.c);
  }
  if (field == "abs_a") {
    if (!r.a) return std::nullopt;
    return std::abs(*r.a);
  }
  throw std::invalid_argument("unknown trace field '" + std::string(field) + "'");
}

/// Running minimum of a series; entry k is min over the first k+1 values.
inline std::vector<double> running_min(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(out.empty() ? v : std::min(out.back(), v));
  return out;
}

/// (iter, min over rows up to iter of field) for every row where the field is present.
inline std::vector<std::pair<std::size_t, double>> summarize_min_so_far(std::span<const TraceRecord> trace,
                                                                         std::string_view field) {
  if (trace.empty()) throw std::invalid_argument("summarize_min_so_far: empty trace");
  std::vector<std::pair<std::size_t, double>> out;
  for (const TraceRecord& r : trace) {
    const auto v = trace_field(r, field);
    if (!v) continue;
    const double m = out.empty() ? *v : std::min(out.back().second, *v);
    out.emplace_back(r.iter, m);
  }
  return out;
}

/// Least-squares slope of log(y) against log(x) over points with x, y > 0.
inline double loglog_slope(std::span<const std::pair<double, double>> points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (auto [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("loglog_slope: need at least two positive points");
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace adjmm
