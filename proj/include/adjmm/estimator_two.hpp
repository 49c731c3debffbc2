#pragma once

#include <cmath>
#include <sstream>

#include "adjmm/estimate.hpp"
#include "adjmm/estimator_one.hpp"

namespace adjmm {

/// Independent step sizes: q(t, s) = (a + b t + c s + d t s) / (sqrt(1+t^2) sqrt(1+s^2)).
struct StepCoefficientsTwo {
  double a = 0.0;  ///< <u,(A-V)v>
  double b = 0.0;  ///< <w,(A-V)v>
  double c = 0.0;  ///< <u,(A-V)x>
  double d = 0.0;  ///< <w,(A-V)x>
  double tau = 0.0;
  double xi = 0.0;

  double e() const { return a * b + c * d; }
  double f() const { return a * a + c * c - b * b - d * d; }
};

inline StepCoefficientsTwo coefficients_two(const BilinearValues& bv) { return {bv.uv, bv.wv, bv.ux, bv.wx}; }

/// 2 forward calls (A v, A x) and 2 adjoint calls (V* u, V* w).
inline StepCoefficientsTwo coefficients_two(BlackBoxPair& pair, const IteratePair& it, const DirectionPair& dir) {
  return coefficients_two(bilinear_values(pair, it, dir));
}

inline double q_value(const StepCoefficientsTwo& k, double tau, double xi) {
  return (k.a + k.b * tau + k.c * xi + k.d * tau * xi) / (std::sqrt(1.0 + tau * tau) * std::sqrt(1.0 + xi * xi));
}

/// q^2 along the curve where xi is optimal for the given tau:
/// (a^2 + c^2 + 2 t e + t^2 (b^2 + d^2)) / (1 + t^2).
inline double q_squared_reduced(const StepCoefficientsTwo& k, double tau) {
  const double num =
      k.a * k.a + k.c * k.c + 2.0 * tau * k.e() + tau * tau * (k.b * k.b + k.d * k.d);
  return num / (1.0 + tau * tau);
}

/// Case analysis of the reduced objective q^2(t). When e = 0 the comparison is a^2 + c^2 vs b^2 + d^2.
inline LineShape classify_two(const StepCoefficientsTwo& k) {
  const double e = k.e();
  if (e != 0.0) return LineShape::unique_maximum;
  const double lhs = k.a * k.a + k.c * k.c;
  const double rhs = k.b * k.b + k.d * k.d;
  if (lhs > rhs) return LineShape::maximum_at_zero;
  if (lhs < rhs) return LineShape::unbounded;
  return LineShape::constant;
}

struct StepTwo {
  StepStatus status = StepStatus::need_resample;
  double tau = 0.0;
  double xi = 0.0;
};

/// Scaled by a^2 + b^2 + c^2 + d^2 (which bounds |f|) for the same reason as a_tolerance.
inline double e_tolerance(const StepCoefficientsTwo& k) {
  return 1e-14 * (k.a * k.a + k.b * k.b + k.c * k.c + k.d * k.d);
}

/// tau = sign(e) (-f/(2|e|) + sqrt(f^2/(4e^2) + 1)), the root picked by the sign of (q^2)'(0) = 2e;
/// xi then follows from the xi-optimality condition.
inline StepTwo step_sizes_two(const StepCoefficientsTwo& k) {
  const double e = k.e();
  const double f = k.f();
  if (std::abs(e) <= e_tolerance(k)) return {};
  const double h = f / (2.0 * std::abs(e));
  const double r = std::hypot(h, 1.0);
  const double magnitude = h <= 0.0 ? r - h : 1.0 / (h + r);
  const double tau = std::copysign(magnitude, e);
  const double denom = k.a + tau * k.b;
  if (std::abs(denom) <= 1e-300) return {};
  return {StepStatus::ok, tau, (k.c + tau * k.d) / denom};
}

/// The realized objective has the sign of a + tau b; u+ is negated when that is negative so the
/// iterate keeps a nonnegative objective (both signs describe the same singular direction).
inline IteratePair apply_step_two(const IteratePair& it, const DirectionPair& dir, const StepCoefficientsTwo& k,
                                  double tau, double xi, double new_objective) {
  Vec u = combine_normalized(it.u, tau, dir.w);
  if (k.a + tau * k.b < 0.0) scale(-1.0, u);
  return {std::move(u), combine_normalized(it.v, xi, dir.x), new_objective};
}

inline IterationOutcome iterate_two(BlackBoxPair& pair, const IteratePair& it, RngState& rng,
                                    const EstimatorConfig& cfg = {}) {
  for (std::size_t attempt = 0;; ++attempt) {
    DirectionPair dir = sample_directions(rng, it);
    StepCoefficientsTwo k = coefficients_two(pair, it, dir);
    const StepTwo step = step_sizes_two(k);
    const double stat = std::abs(k.b) + std::abs(k.c);
    if (step.status == StepStatus::ok || stat < cfg.eps) {
      IterationOutcome out;
      out.stop_statistic = stat;
      out.row.a = k.a;
      out.row.b = k.b;
      out.row.c = k.c;
      out.row.d = k.d;
      out.next = it;
      if (step.status == StepStatus::ok) {
        const double candidate = std::sqrt(q_squared_reduced(k, step.tau));
        if (candidate > it.objective) {
          out.next = apply_step_two(it, dir, k, step.tau, step.xi, candidate);
          out.stepped = true;
        }
      }
      out.row.tau = out.stepped ? step.tau : 0.0;
      out.row.xi = out.stepped ? step.xi : 0.0;
      out.row.objective = out.next.objective;
      return out;
    }
    if (attempt >= cfg.max_resamples) {
      std::ostringstream os;
      os << "two-step estimator: a_k b_k + c_k d_k stayed below tolerance for " << attempt + 1
         << " direction pairs";
      throw NumericalError(os.str());
    }
  }
}

inline EstimateReport run_two(BlackBoxPair& pair, const EstimatorConfig& cfg, RngState& rng) {
  return detail::run_loop(pair, cfg, rng, [](BlackBoxPair& p, const IteratePair& it, RngState& r,
                                             const EstimatorConfig& c) { return iterate_two(p, it, r, c); });
}

}  // namespace adjmm
