#pragma once

#include <cmath>
#include <sstream>

#include "adjmm/estimate.hpp"

namespace adjmm {

/// Joint-step line search s(t) = <u + t w, (A-V)(v + t x)> / (1 + t^2).
/// s'(t) is proportional to a + b t - a t^2.
struct StepCoefficientsOne {
  /// s'(0): <u,(A-V)x> + <w,(A-V)v>
  double a = 0.0;
  /// 2 (<w,(A-V)x> - <u,(A-V)v>)
  double b = 0.0;
  /// <u,(A-V)v> measured at the current iterate.
  double objective = 0.0;
  double tau = 0.0;
};

inline StepCoefficientsOne coefficients_one(const BilinearValues& bv) {
  return {bv.ux + bv.wv, 2.0 * (bv.wx - bv.uv), bv.uv, 0.0};
}

/// 2 forward calls (A x, A v) and 2 adjoint calls (V* u, V* w).
inline StepCoefficientsOne coefficients_one(BlackBoxPair& pair, const IteratePair& it, const DirectionPair& dir) {
  return coefficients_one(bilinear_values(pair, it, dir));
}

/// s(t) - s(0), which depends on (a, b) only.
inline double line_gain_one(double a, double b, double t) { return (a * t + 0.5 * b * t * t) / (1.0 + t * t); }

enum class LineShape {
  unique_maximum,
  maximum_at_zero,
  /// supremum approached as |t| -> infinity, never attained
  unbounded,
  constant,
};

/// Exact case analysis of the one-step line search.
inline LineShape classify_one(double a, double b) {
  if (a != 0.0) return LineShape::unique_maximum;
  if (b < 0.0) return LineShape::maximum_at_zero;
  if (b > 0.0) return LineShape::unbounded;
  return LineShape::constant;
}

enum class StepStatus { ok, need_resample };

struct StepOne {
  StepStatus status = StepStatus::need_resample;
  double tau = 0.0;
};

/// Relative to the size of the line-search coefficients, so an operator pair whose difference is
/// itself at rounding level (a matched projector pair) still takes steps instead of stalling.
inline double a_tolerance(double b, double objective = 0.0) { return 1e-14 * (std::abs(b) + std::abs(objective)); }

/// Maximizer sign(a) (b/(2|a|) + sqrt(b^2/(4a^2) + 1)). When b < 0 the sum cancels, so the
/// reciprocal of the other root (the two roots multiply to -1) is used instead.
inline StepOne step_size_one(double a, double b, double objective = 0.0) {
  if (std::abs(a) <= a_tolerance(b, objective)) return {StepStatus::need_resample, 0.0};
  const double h = b / (2.0 * std::abs(a));
  const double r = std::hypot(h, 1.0);
  const double magnitude = h >= 0.0 ? h + r : 1.0 / (r - h);
  return {StepStatus::ok, std::copysign(magnitude, a)};
}

inline StepOne step_size_one(const StepCoefficientsOne& c) { return step_size_one(c.a, c.b, c.objective); }

/// u+ = (u + t w)/||.||, v+ = (v + t x)/||.||, renormalized explicitly.
inline IteratePair apply_step_one(const IteratePair& it, const DirectionPair& dir, double tau, double new_objective) {
  return {combine_normalized(it.u, tau, dir.w), combine_normalized(it.v, tau, dir.x), new_objective};
}

inline IterationOutcome iterate_one(BlackBoxPair& pair, const IteratePair& it, RngState& rng,
                                    const EstimatorConfig& cfg = {}) {
  for (std::size_t attempt = 0;; ++attempt) {
    DirectionPair dir = sample_directions(rng, it);
    StepCoefficientsOne c = coefficients_one(pair, it, dir);
    const StepOne step = step_size_one(c);
    const double stat = std::abs(c.a);
    if (step.status == StepStatus::ok || stat < cfg.eps) {
      IterationOutcome out;
      out.stop_statistic = stat;
      out.row.a = c.a;
      out.row.b = c.b;
      out.next = it;
      if (step.status == StepStatus::ok) {
        // ascent: s(tau) = s(0) + tau a / 2
        const double candidate = c.objective + 0.5 * step.tau * c.a;
        if (candidate > it.objective) {
          out.next = apply_step_one(it, dir, step.tau, candidate);
          out.stepped = true;
        }
      }
      out.row.tau = out.stepped ? step.tau : 0.0;
      out.row.objective = out.next.objective;
      return out;
    }
    if (attempt >= cfg.max_resamples) {
      std::ostringstream os;
      os << "one-step estimator: a_k stayed below tolerance for " << attempt + 1 << " direction pairs";
      throw NumericalError(os.str());
    }
  }
}

inline EstimateReport run_one(BlackBoxPair& pair, const EstimatorConfig& cfg, RngState& rng) {
  return detail::run_loop(pair, cfg, rng, [](BlackBoxPair& p, const IteratePair& it, RngState& r,
                                             const EstimatorConfig& c) { return iterate_one(p, it, r, c); });
}

}  // namespace adjmm
