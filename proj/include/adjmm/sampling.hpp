#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>

#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"
#include "adjmm/rng.hpp"

namespace adjmm {

/// Current unit vectors u in S^{m-1}, v in S^{d-1} and objective <u,(A-V)v>.
struct IteratePair {
  Vec u;
  Vec v;
  double objective = 0.0;
};

/// Tangent search directions: w orthogonal to u, x orthogonal to v, both unit.
struct DirectionPair {
  Vec w;
  Vec x;
};

inline Vec gaussian_vector(RngState& rng, std::size_t dim) {
  Vec y(dim);
  for (double& v : y) v = rng.normal();
  return y;
}

inline Vec sample_unit_sphere(RngState& rng, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("sample_unit_sphere: dimension must be >= 1");
  for (;;) {
    Vec y = gaussian_vector(rng, dim);
    const double n = norm2(y);
    if (n < 1e-300) continue;
    for (double& v : y) v /= n;
    return y;
  }
}

/// (y - <y,anchor> anchor) / ||.||, or nullopt when the projection is (numerically) zero.
inline std::optional<Vec> project_tangent(std::span<const double> anchor, std::span<const double> y) {
  Vec r(y.begin(), y.end());
  axpy(-dot(y, anchor), anchor, r);
  const double n = norm2(r);
  if (n < 1e-12) return std::nullopt;
  scale(1.0 / n, r);
  return r;
}

inline Vec sample_tangent_direction(RngState& rng, std::span<const double> anchor) {
  if (anchor.size() < 2) throw std::invalid_argument("sample_tangent_direction: no tangent sphere in dimension 1");
  if (std::abs(norm2(anchor) - 1.0) > 1e-9) throw std::invalid_argument("sample_tangent_direction: anchor is not a unit vector");
  for (;;) {
    Vec y = gaussian_vector(rng, anchor.size());
    if (auto x = project_tangent(anchor, y)) return *std::move(x);
  }
}

/// x is drawn before w; the order is part of the reproducible stream.
inline DirectionPair sample_directions(RngState& rng, const IteratePair& it) {
  Vec x = sample_tangent_direction(rng, it.v);
  Vec w = sample_tangent_direction(rng, it.u);
  return {std::move(w), std::move(x)};
}

struct InitResult {
  IteratePair iterate;
  /// Raw objective before any sign flip.
  double raw_objective = 0.0;
  /// ||A v0|| + ||V* u0||; the natural size of rounding error in the objective.
  double scale = 0.0;
  bool flipped = false;
  /// |objective| <= null_tol * scale: A and V look adjoint (A = V).
  bool possible_adjoint_pair = false;
};

/// Objective at a given starting pair, flipping u when it is negative. 1 forward + 1 adjoint call.
inline InitResult initialize_from(BlackBoxPair& pair, Vec u0, Vec v0, double null_tol) {
  const Vec Av = pair.forward(v0);
  const Vec Vu = pair.adjoint(u0);
  InitResult r;
  r.raw_objective = dot(u0, Av) - dot(Vu, v0);
  r.scale = norm2(Av) + norm2(Vu);
  r.possible_adjoint_pair = std::abs(r.raw_objective) <= null_tol * r.scale;
  double obj = r.raw_objective;
  if (obj < 0.0) {
    scale(-1.0, u0);
    obj = -obj;
    r.flipped = true;
  }
  r.iterate = {std::move(u0), std::move(v0), obj};
  return r;
}

inline InitResult initialize(BlackBoxPair& pair, RngState& rng, double null_tol) {
  if (pair.rows() < 2 || pair.cols() < 2)
    throw DimensionError("initialize: both dimensions must be >= 2 for tangent directions to exist");
  Vec u0 = sample_unit_sphere(rng, pair.rows());
  Vec v0 = sample_unit_sphere(rng, pair.cols());
  return initialize_from(pair, std::move(u0), std::move(v0), null_tol);
}

}  // namespace adjmm
