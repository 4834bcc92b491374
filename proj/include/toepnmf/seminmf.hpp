#pragma once

#include "toepnmf/hrir_io.hpp"
#include "toepnmf/model.hpp"
#include "toepnmf/toeplitz.hpp"

#include <cstdint>

namespace toepnmf {

struct TrainConfig {
  Index filter_length = 25;  // K
  int iterations = 50;       // T
  std::uint64_t seed = 0;
  double epsilon_denom = 1e-12;
  // Relative ridge, scaled by trace(A)/dim(A), applied only when the
  // resonance system fails to factor.
  double ridge = 1e-10;
  // Stop once the RMSE improves by less than 1e-10 for 3 iterations in a row.
  bool early_stop = false;
  // Report to stderr when the input set is not fully preprocessed.
  bool warn_unpreprocessed = true;
};

// Multiplicative semi-NMF update of G (N x K) for fixed F (M x K).
Matrix update_G(const Matrix& x, const Matrix& f, const Matrix& g, double eps = 1e-12);

// Least-squares resonance filter for fixed G: the constrained Toeplitz
// parameters minimizing ||X - T(theta) G^T||_F. Builds and solves the
// (M-K+1)-sized normal equations from diagonal sums of G^T G and X G.
ToeplitzParams solve_resonance(const Matrix& x, const Matrix& g, double ridge = 1e-10);

// ||X - T(theta) G^T||_F^2 for the filter f.
double factor_objective(const Matrix& x, const Vector& f, const Matrix& g);

FactorModel train(const HrirSet& set, const TrainConfig& config);

// conv(f, G.row(j)) truncated to M samples.
Vector reconstruct(const FactorModel& model, Index direction);
// All directions as an M x N matrix.
Matrix reconstruct_all(const FactorModel& model);

}  // namespace toepnmf
