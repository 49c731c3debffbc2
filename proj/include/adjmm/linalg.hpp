#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adjmm {

using Vec = std::vector<double>;

/// Raised when vector or operator dimensions disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on non-finite data or when a bounded retry loop is exhausted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_length(std::span<const double> x, std::size_t expected, const char* what) {
  if (x.size() != expected) {
    std::ostringstream os;
    os << what << ": expected length " << expected << ", got " << x.size();
    throw DimensionError(os.str());
  }
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    std::ostringstream os;
    os << "dot: length mismatch " << x.size() << " vs " << y.size();
    throw DimensionError(os.str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

/// y <- y + alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

/// (x + t*y) / ||x + t*y||; the caller guarantees the combination is nonzero.
inline Vec combine_normalized(std::span<const double> x, double t, std::span<const double> y) {
  Vec r(x.begin(), x.end());
  axpy(t, y, r);
  const double n = norm2(r);
  for (double& v : r) v /= n;
  return r;
}

inline Vec basis_vector(std::size_t n, std::size_t k) {
  Vec e(n, 0.0);
  e.at(k) = 1.0;
  return e;
}

}  // namespace adjmm
