#pragma once

#include "toepnmf/types.hpp"

namespace toepnmf {

// Parameters theta_k, k in [1-M, K-1], of an M x K Toeplitz matrix with
// F(i, j) = theta_{j-i}: the first row holds theta_0..theta_{K-1}, the first
// column theta_0..theta_{1-M}.
//
// A constrained parameter set only allows k in [K-M, 0]; the resulting
// matrix is the convolution matrix of the filter (theta_0, theta_{-1}, ...,
// theta_{K-M}) of length M-K+1.
class ToeplitzParams {
 public:
  ToeplitzParams(Index rows, Index cols, bool constrained = false);

  // Constrained parameters for filter f convolved with length-K sequences.
  static ToeplitzParams from_filter(const Vector& f, Index cols);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool constrained() const { return constrained_; }
  Index min_index() const { return 1 - rows_; }
  Index max_index() const { return cols_ - 1; }
  bool is_free(Index k) const;

  double operator[](Index k) const { return theta_(k + rows_ - 1); }
  // Throws DimensionError for k outside the range or outside the constrained
  // support.
  void set(Index k, double value);

  // (theta_0, theta_{-1}, ..., theta_{K-M}); requires constrained().
  Vector resonance_filter() const;
  const Vector& raw() const { return theta_; }

 private:
  Index rows_;
  Index cols_;
  bool constrained_;
  Vector theta_;
};

// Number of entries on diagonal k of an M x K matrix.
Index diagonal_length(Index rows, Index cols, Index k);

// sum_{j-i=k} F(i, j), i.e. trace(F^T S^k) without forming S^k.
double diagonal_sum(const Matrix& f, Index k);

Matrix toeplitz_from_params(const ToeplitzParams& p);

// Frobenius-nearest Toeplitz matrix: each theta_k is the mean of diagonal k.
ToeplitzParams nearest_toeplitz(const Matrix& f);

// T(theta) * g for constrained theta, evaluated as the convolution f * g.
Vector constrained_product(const ToeplitzParams& p, const Vector& g);

}  // namespace toepnmf
