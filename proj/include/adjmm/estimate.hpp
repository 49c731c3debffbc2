#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/rng.hpp"
#include "adjmm/sampling.hpp"

namespace adjmm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class StopReason { tolerance, max_iters, adjoint_pair };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::tolerance:
      return "tolerance";
    case StopReason::max_iters:
      return "max_iters";
    case StopReason::adjoint_pair:
      return "adjoint_pair";
  }
  return "unknown";
}

/// One row per iteration. Row 0 is the initialization and carries only the objective and counts.
/// Coefficients and step sizes belong to the iteration that produced the row's objective.
struct TraceRecord {
  std::size_t iter = 0;
  double objective = 0.0;
  std::optional<double> a, b, c, d;
  std::optional<double> tau, xi;
  std::optional<double> residual;
  std::uint64_t n_forward = 0;
  std::uint64_t n_adjoint = 0;
};

struct EstimateReport {
  double estimate = 0.0;
  std::size_t iterations = 0;
  StopReason stop_reason = StopReason::max_iters;
  IteratePair final_pair;
  std::vector<TraceRecord> trace;
  std::uint64_t n_forward = 0;
  std::uint64_t n_adjoint = 0;
};

/// Called on every trace row with the iterate it describes; may fill `residual`.
using TraceObserver = std::function<void(const IteratePair&, TraceRecord&)>;

struct EstimatorConfig {
  std::size_t max_iters = 5000;
  double eps = 1e-8;
  std::size_t patience = 5;
  double null_tol = 1e-12;
  /// Extra initial draws before a zero objective is taken as A = V.
  std::size_t init_resamples = 3;
  /// Fresh direction pairs tried when a step is degenerate but the stopping statistic is not small.
  std::size_t max_resamples = 50;
  bool stop_on_null = true;
  TraceObserver observer;

  void validate() const {
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(null_tol >= 0.0)) throw ConfigError("null_tol must be >= 0");
  }
};

/// The four bilinear values <u,(A-V)v>, <w,(A-V)v>, <u,(A-V)x>, <w,(A-V)x>
/// from exactly two forward (A v, A x) and two adjoint (V* u, V* w) calls.
struct BilinearValues {
  double uv = 0.0;
  double wv = 0.0;
  double ux = 0.0;
  double wx = 0.0;
};

inline BilinearValues bilinear_values(BlackBoxPair& pair, const IteratePair& it, const DirectionPair& dir) {
  const Vec Av = pair.forward(it.v);
  const Vec Ax = pair.forward(dir.x);
  const Vec Vu = pair.adjoint(it.u);
  const Vec Vw = pair.adjoint(dir.w);
  BilinearValues r;
  r.uv = dot(it.u, Av) - dot(Vu, it.v);
  r.wv = dot(dir.w, Av) - dot(Vw, it.v);
  r.ux = dot(it.u, Ax) - dot(Vu, dir.x);
  r.wx = dot(dir.w, Ax) - dot(Vw, dir.x);
  return r;
}

/// Result of one estimator iteration.
struct IterationOutcome {
  IteratePair next;
  TraceRecord row;
  bool stepped = false;
  /// Stopping statistic: |a| for the one-step method, |b| + |c| for the two-step method.
  double stop_statistic = 0.0;
};

namespace detail {

template <typename IterateFn>
EstimateReport run_loop(BlackBoxPair& pair, const EstimatorConfig& cfg, RngState& rng, IterateFn&& iterate) {
  cfg.validate();
  EstimateReport report;

  InitResult init = initialize(pair, rng, cfg.null_tol);
  for (std::size_t retry = 0; init.possible_adjoint_pair && retry < cfg.init_resamples; ++retry)
    init = initialize(pair, rng, cfg.null_tol);

  IteratePair it = std::move(init.iterate);
  auto record = [&](TraceRecord row) {
    row.n_forward = pair.n_forward();
    row.n_adjoint = pair.n_adjoint();
    if (cfg.observer) cfg.observer(it, row);
    report.trace.push_back(std::move(row));
  };
  TraceRecord row0;
  row0.objective = it.objective;
  record(std::move(row0));

  auto finish = [&](StopReason reason) {
    report.stop_reason = reason;
    report.estimate = report.trace.back().objective;
    report.iterations = report.trace.size() - 1;
    report.final_pair = it;
    report.n_forward = pair.n_forward();
    report.n_adjoint = pair.n_adjoint();
    return report;
  };

  if (init.possible_adjoint_pair && cfg.stop_on_null) return finish(StopReason::adjoint_pair);

  std::size_t quiet = 0;
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    IterationOutcome out = iterate(pair, it, rng, cfg);
    out.row.iter = k;
    it = std::move(out.next);
    record(std::move(out.row));
    quiet = out.stop_statistic < cfg.eps ? quiet + 1 : 0;
    if (quiet >= cfg.patience) return finish(StopReason::tolerance);
  }
  return finish(StopReason::max_iters);
}

}  // namespace detail
}  // namespace adjmm
