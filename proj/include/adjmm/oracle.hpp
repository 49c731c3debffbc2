#pragma once

// Brute-force references used to check the closed-form step sizes and the
// estimates: grid + golden-section line searches, a one-sided Jacobi SVD and
// the dot-product adjointness test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/rng.hpp"
#include "adjmm/sampling.hpp"

namespace adjmm {

struct LineMaximum {
  double arg = 0.0;
  double value = 0.0;
  /// max - min over the grid is at rounding level: any argument is a maximizer.
  bool flat = false;
};

struct PlaneMaximum {
  double tau = 0.0;
  double xi = 0.0;
  double value = 0.0;
  bool flat = false;
};

/// Golden-section search for a maximum of a unimodal f on [lo, hi].
inline LineMaximum golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                           double tol = 1e-10, int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (hi - lo) > tol; ++i) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (lo + hi);
  const double fm = f(mid);
  if (fm >= fc && fm >= fd) return {mid, fm, false};
  return fc >= fd ? LineMaximum{c, fc, false} : LineMaximum{d, fd, false};
}

/// Uniform grid of n_points on [lo, hi], then golden-section refinement in the cells around the best node.
inline LineMaximum grid_maximize(const std::function<double(double)>& f, double lo, double hi,
                                 std::size_t n_points) {
  if (n_points < 3) throw std::invalid_argument("grid_maximize: need at least 3 grid points");
  const double h = (hi - lo) / static_cast<double>(n_points - 1);
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  double worst_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_points; ++i) {
    const double val = f(lo + h * static_cast<double>(i));
    if (val > best_val) {
      best_val = val;
      best = i;
    }
    worst_val = std::min(worst_val, val);
  }
  const double scale = std::max({1.0, std::abs(best_val), std::abs(worst_val)});
  if (best_val - worst_val <= 1e-14 * scale) return {lo + h * static_cast<double>(best), best_val, true};

  const double left = std::max(lo, lo + h * (static_cast<double>(best) - 1.0));
  const double right = std::min(hi, lo + h * (static_cast<double>(best) + 1.0));
  LineMaximum polished = golden_section_maximize(f, left, right);
  if (polished.value < best_val) return {lo + h * static_cast<double>(best), best_val, false};
  return polished;
}

/// 2-D grid, then alternating coordinate-wise golden-section polish around the best node.
inline PlaneMaximum grid_maximize(const std::function<double(double, double)>& f, double lo, double hi,
                                  std::size_t n_points, int polish_rounds = 60) {
  if (n_points < 3) throw std::invalid_argument("grid_maximize: need at least 3 grid points");
  const double h = (hi - lo) / static_cast<double>(n_points - 1);
  PlaneMaximum best{0.0, 0.0, -std::numeric_limits<double>::infinity(), false};
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t = lo + h * static_cast<double>(i);
    for (std::size_t j = 0; j < n_points; ++j) {
      const double s = lo + h * static_cast<double>(j);
      const double val = f(t, s);
      if (val > best.value) best = {t, s, val, false};
      worst = std::min(worst, val);
    }
  }
  const double scale = std::max({1.0, std::abs(best.value), std::abs(worst)});
  if (best.value - worst <= 1e-14 * scale) {
    best.flat = true;
    return best;
  }
  for (int round = 0; round < polish_rounds; ++round) {
    const double xi = best.xi;
    LineMaximum lt = golden_section_maximize([&](double t) { return f(t, xi); }, std::max(lo, best.tau - h),
                                             std::min(hi, best.tau + h), 1e-12);
    if (lt.value > best.value) {
      best.tau = lt.arg;
      best.value = lt.value;
    }
    const double tau = best.tau;
    LineMaximum ls = golden_section_maximize([&](double s) { return f(tau, s); }, std::max(lo, best.xi - h),
                                             std::min(hi, best.xi + h), 1e-12);
    if (ls.value > best.value) {
      best.xi = ls.arg;
      best.value = ls.value;
    }
  }
  return best;
}

/// <p, (A-V) q> evaluated through both oracles on the given vectors.
inline double bilinear_form(BlackBoxPair& pair, std::span<const double> p, std::span<const double> q) {
  const Vec Aq = pair.forward(q);
  const Vec Vp = pair.adjoint(p);
  return dot(p, Aq) - dot(Vp, q);
}

/// Brute-force maximization of the joint-step objective by direct oracle evaluation:
/// s(t) = <u + t w, (A-V)(v + t x)> / (||u + t w|| ||v + t x||).
inline LineMaximum grid_maximize_s(BlackBoxPair& pair, const IteratePair& it, const DirectionPair& dir, double lo,
                                   double hi, std::size_t n_points) {
  auto s = [&](double t) {
    Vec p = it.u, q = it.v;
    axpy(t, dir.w, p);
    axpy(t, dir.x, q);
    return bilinear_form(pair, p, q) / (norm2(p) * norm2(q));
  };
  return grid_maximize(s, lo, hi, n_points);
}

/// Brute-force maximization of q(t, s)^2 by direct oracle evaluation.
inline PlaneMaximum grid_maximize_q(BlackBoxPair& pair, const IteratePair& it, const DirectionPair& dir, double lo,
                                    double hi, std::size_t n_points) {
  auto q2 = [&](double t, double s) {
    Vec p = it.u, q = it.v;
    axpy(t, dir.w, p);
    axpy(s, dir.x, q);
    const double val = bilinear_form(pair, p, q) / (norm2(p) * norm2(q));
    return val * val;
  };
  return grid_maximize(q2, lo, hi, n_points);
}

/// Singular values (descending) with left/right singular vectors stored as matrix columns.
struct SpectralSummary {
  Vec sigma;
  DenseMatrix left;   ///< m x k
  DenseMatrix right;  ///< d x k

  double largest() const { return sigma.empty() ? 0.0 : sigma.front(); }
};

namespace detail {

/// One-sided Jacobi on the columns of a tall (rows >= cols) matrix given column-major.
inline SpectralSummary hestenes_svd(std::size_t rows, std::size_t cols, std::vector<Vec> work) {
  std::vector<Vec> right(cols, Vec(cols, 0.0));
  for (std::size_t j = 0; j < cols; ++j) right[j][j] = 1.0;

  const double tol = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        const double alpha = dot(work[p], work[p]);
        const double beta = dot(work[q], work[q]);
        const double gamma = dot(work[p], work[q]);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        auto rotate = [c, s](Vec& x, Vec& y) {
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double xi = x[i], yi = y[i];
            x[i] = c * xi - s * yi;
            y[i] = s * xi + c * yi;
          }
        };
        rotate(work[p], work[q]);
        rotate(right[p], right[q]);
      }
    }
    if (!rotated) break;
  }

  Vec sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) sigma[j] = norm2(work[j]);
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SpectralSummary out{Vec(cols), DenseMatrix(rows, cols), DenseMatrix(cols, cols)};
  const double cutoff = (sigma.empty() ? 0.0 : sigma[order[0]]) * 1e-14;
  std::vector<Vec> left_cols;
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sigma[j];
    for (std::size_t i = 0; i < cols; ++i) out.right(i, k) = right[j][i];
    Vec u(rows, 0.0);
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      u = work[j];
      scale(1.0 / sigma[j], u);
    } else {
      // Null directions: complete the left basis by Gram-Schmidt on coordinate vectors.
      for (std::size_t e = 0; e < rows; ++e) {
        Vec cand = basis_vector(rows, e);
        for (int pass = 0; pass < 2; ++pass)
          for (const Vec& prev : left_cols) axpy(-dot(prev, cand), prev, cand);
        const double n = norm2(cand);
        if (n > 0.5) {
          scale(1.0 / n, cand);
          u = std::move(cand);
          break;
        }
      }
    }
    left_cols.push_back(u);
    for (std::size_t i = 0; i < rows; ++i) out.left(i, k) = u[i];
  }
  return out;
}

}  // namespace detail

/// Thin SVD by one-sided (Hestenes) Jacobi rotations. Desk scale: rows * cols <= 1e6.
inline SpectralSummary jacobi_svd(const DenseMatrix& M) {
  if (!all_finite(M.entries())) throw NumericalError("jacobi_svd: non-finite entry");
  if (M.rows() * M.cols() > 1'000'000) throw std::invalid_argument("jacobi_svd: matrix too large for the reference SVD");
  const bool tall = M.rows() >= M.cols();
  const DenseMatrix& src = M;
  const std::size_t rows = tall ? M.rows() : M.cols();
  const std::size_t cols = tall ? M.cols() : M.rows();
  std::vector<Vec> work(cols, Vec(rows));
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (tall)
        work[j][i] = src(i, j);
      else
        work[i][j] = src(i, j);
    }
  SpectralSummary s = detail::hestenes_svd(rows, cols, std::move(work));
  if (!tall) std::swap(s.left, s.right);
  return s;
}

/// Largest relative dot-product defect |<Av,u> - <v,V*u>| / (||Av|| ||u|| + ||v|| ||V*u|| + eps)
/// over random unit (u, v).
inline double adjointness_test(const ForwardOracle& forward, const AdjointOracle& adjoint, std::size_t trials,
                               RngState& rng) {
  if (trials < 1) throw std::invalid_argument("adjointness_test: trials must be >= 1");
  if (forward.rows != adjoint.rows || forward.cols != adjoint.cols)
    throw DimensionError("adjointness_test: operator shapes differ");
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vec u = sample_unit_sphere(rng, forward.rows);
    const Vec v = sample_unit_sphere(rng, forward.cols);
    const Vec Av = forward(v);
    const Vec Vu = adjoint(u);
    const double defect = std::abs(dot(Av, u) - dot(v, Vu)) /
                          (norm2(Av) * norm2(u) + norm2(v) * norm2(Vu) + std::numeric_limits<double>::epsilon());
    worst = std::max(worst, defect);
  }
  return worst;
}

}  // namespace adjmm
