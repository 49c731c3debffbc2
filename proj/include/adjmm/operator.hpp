#pragma once

#include <cstddef>
#include <initializer_list>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adjmm/linalg.hpp"

namespace adjmm {

/// Real m x d matrix, row-major.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, Vec entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
      std::ostringstream os;
      os << "DenseMatrix: " << rows_ << "x" << cols_ << " needs " << rows_ * cols_ << " entries, got "
         << entries_.size();
      throw DimensionError(os.str());
    }
    if (!all_finite(entries_)) throw NumericalError("DenseMatrix: non-finite entry");
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t m = rows.size();
    std::size_t d = m == 0 ? 0 : rows.begin()->size();
    Vec e;
    e.reserve(m * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw DimensionError("DenseMatrix::from_rows: ragged rows");
      e.insert(e.end(), r.begin(), r.end());
    }
    return DenseMatrix(m, d, std::move(e));
  }

  static DenseMatrix diagonal(std::span<const double> diag) {
    DenseMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }
  static DenseMatrix diagonal(std::initializer_list<double> diag) {
    return diagonal(std::span<const double>(diag.begin(), diag.size()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return entries_; }

  double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * cols_, cols_}; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius_norm() const { return norm2(entries_); }

  friend DenseMatrix operator-(const DenseMatrix& x, const DenseMatrix& y) {
    if (x.rows_ != y.rows_ || x.cols_ != y.cols_) throw DimensionError("DenseMatrix difference: shape mismatch");
    DenseMatrix r = x;
    for (std::size_t k = 0; k < r.entries_.size(); ++k) r.entries_[k] -= y.entries_[k];
    return r;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec entries_;
};

/// result_i = sum_j M(i,j) v_j
inline Vec dense_forward(const DenseMatrix& M, std::span<const double> v) {
  require_length(v, M.cols(), "dense_forward");
  Vec r(M.rows(), 0.0);
  for (std::size_t i = 0; i < M.rows(); ++i) r[i] = dot(M.row(i), v);
  return r;
}

/// result_j = sum_i M(i,j) u_i
inline Vec dense_adjoint(const DenseMatrix& M, std::span<const double> u) {
  require_length(u, M.rows(), "dense_adjoint");
  Vec r(M.cols(), 0.0);
  for (std::size_t i = 0; i < M.rows(); ++i) axpy(u[i], M.row(i), r);
  return r;
}

using LinearMap = std::function<Vec(std::span<const double>)>;

/// Black-box access to v -> A v for an m x d operator A.
struct ForwardOracle {
  std::size_t rows = 0;
  std::size_t cols = 0;
  LinearMap apply;

  Vec operator()(std::span<const double> v) const { return apply(v); }
};

/// Black-box access to u -> V* u for an m x d operator V.
struct AdjointOracle {
  std::size_t rows = 0;
  std::size_t cols = 0;
  LinearMap apply_adjoint;

  Vec operator()(std::span<const double> u) const { return apply_adjoint(u); }
};

inline ForwardOracle dense_forward_oracle(DenseMatrix M) {
  auto shared = std::make_shared<const DenseMatrix>(std::move(M));
  return {shared->rows(), shared->cols(), [shared](std::span<const double> v) { return dense_forward(*shared, v); }};
}

/// Adjoint oracle of V, i.e. u -> V^T u.
inline AdjointOracle dense_adjoint_oracle(DenseMatrix V) {
  auto shared = std::make_shared<const DenseMatrix>(std::move(V));
  return {shared->rows(), shared->cols(), [shared](std::span<const double> u) { return dense_adjoint(*shared, u); }};
}

inline AdjointOracle zero_adjoint_oracle(std::size_t rows, std::size_t cols) {
  return {rows, cols, [cols](std::span<const double>) { return Vec(cols, 0.0); }};
}

inline ForwardOracle scaled(ForwardOracle op, double alpha) {
  auto f = std::move(op.apply);
  return {op.rows, op.cols, [f = std::move(f), alpha](std::span<const double> v) {
            Vec r = f(v);
            scale(alpha, r);
            return r;
          }};
}

inline AdjointOracle scaled(AdjointOracle op, double alpha) {
  auto f = std::move(op.apply_adjoint);
  return {op.rows, op.cols, [f = std::move(f), alpha](std::span<const double> u) {
            Vec r = f(u);
            scale(alpha, r);
            return r;
          }};
}

/// v -> outer(inner(v)).
inline ForwardOracle compose(ForwardOracle outer, ForwardOracle inner) {
  if (outer.cols != inner.rows) throw DimensionError("compose: inner rows must equal outer cols");
  return {outer.rows, inner.cols, [o = std::move(outer.apply), i = std::move(inner.apply)](std::span<const double> v) {
            Vec t = i(v);
            return o(t);
          }};
}

/// Adjoint of outer*inner: u -> inner*(outer*(u)).
inline AdjointOracle compose(AdjointOracle outer, AdjointOracle inner) {
  if (outer.cols != inner.rows) throw DimensionError("compose: inner rows must equal outer cols");
  return {outer.rows, inner.cols,
          [o = std::move(outer.apply_adjoint), i = std::move(inner.apply_adjoint)](std::span<const double> u) {
            Vec t = o(u);
            return i(t);
          }};
}

/// Forward oracle for A together with adjoint oracle for V, plus per-pair call counters.
/// The counters belong to one estimation run; copies made by wrap_counting start from zero.
class BlackBoxPair {
 public:
  BlackBoxPair(ForwardOracle forward, AdjointOracle adjoint)
      : forward_(std::move(forward)), adjoint_(std::move(adjoint)) {
    if (forward_.rows != adjoint_.rows || forward_.cols != adjoint_.cols) {
      std::ostringstream os;
      os << "BlackBoxPair: forward is " << forward_.rows << "x" << forward_.cols << " but adjoint is "
         << adjoint_.rows << "x" << adjoint_.cols;
      throw DimensionError(os.str());
    }
  }

  static BlackBoxPair dense(DenseMatrix A, DenseMatrix V) {
    return {dense_forward_oracle(std::move(A)), dense_adjoint_oracle(std::move(V))};
  }

  std::size_t rows() const { return forward_.rows; }
  std::size_t cols() const { return forward_.cols; }

  Vec forward(std::span<const double> v) {
    require_length(v, cols(), "forward oracle input");
    Vec r = forward_(v);
    ++n_forward_;
    require_length(r, rows(), "forward oracle output");
    if (!all_finite(r)) throw NumericalError("forward oracle returned a non-finite value");
    return r;
  }

  Vec adjoint(std::span<const double> u) {
    require_length(u, rows(), "adjoint oracle input");
    Vec r = adjoint_(u);
    ++n_adjoint_;
    require_length(r, cols(), "adjoint oracle output");
    if (!all_finite(r)) throw NumericalError("adjoint oracle returned a non-finite value");
    return r;
  }

  std::uint64_t n_forward() const { return n_forward_; }
  std::uint64_t n_adjoint() const { return n_adjoint_; }

  const ForwardOracle& forward_oracle() const { return forward_; }
  const AdjointOracle& adjoint_oracle() const { return adjoint_; }

 private:
  ForwardOracle forward_;
  AdjointOracle adjoint_;
  std::uint64_t n_forward_ = 0;
  std::uint64_t n_adjoint_ = 0;
};

/// Pair sharing the same oracles with fresh zero counters.
inline BlackBoxPair wrap_counting(const BlackBoxPair& pair) {
  return {pair.forward_oracle(), pair.adjoint_oracle()};
}

/// Dense matrix of A, built column by column from the forward oracle. Desk scale only.
inline DenseMatrix materialize(const ForwardOracle& op) {
  DenseMatrix M(op.rows, op.cols);
  for (std::size_t j = 0; j < op.cols; ++j) {
    Vec col = op(basis_vector(op.cols, j));
    require_length(col, op.rows, "materialize");
    for (std::size_t i = 0; i < op.rows; ++i) M(i, j) = col[i];
  }
  return M;
}

/// Dense matrix of V (m x d), built row by row from the adjoint oracle u -> V* u.
inline DenseMatrix materialize(const AdjointOracle& op) {
  DenseMatrix M(op.rows, op.cols);
  for (std::size_t i = 0; i < op.rows; ++i) {
    Vec r = op(basis_vector(op.rows, i));
    require_length(r, op.cols, "materialize");
    for (std::size_t j = 0; j < op.cols; ++j) M(i, j) = r[j];
  }
  return M;
}

}  // namespace adjmm
