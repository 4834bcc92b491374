#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace toepnmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Linear convolution of two dense sequences, full length a+b-1. Small and
// direct; used where clarity beats speed (model assembly, reconstruction).
Vector convolve_full(const Vector& a, const Vector& b);

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace toepnmf
