#pragma once

// Test-only reference computations. Each one takes a different route from the
// library code it checks: dense least squares instead of diagonal means,
// exhaustive support enumeration instead of FISTA/active-set, O(M^2) DFT
// instead of FFT/Bluestein, and so on.

#include "toepnmf/types.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using toepnmf::Index;
using toepnmf::Matrix;
using toepnmf::Vector;

inline std::vector<std::complex<double>> dft(const Vector& x) {
  const Index n = x.size();
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n);
      acc += x(j) * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

inline double spectral_distortion(const Vector& x, const Vector& xhat) {
  const auto a = dft(x);
  const auto b = dft(xhat);
  double pa = 0.0, pb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa = std::max(pa, std::abs(a[i]));
    pb = std::max(pb, std::abs(b[i]));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = std::max(std::abs(a[i]), 1e-12 * pa);
    const double mb = std::max(std::abs(b[i]), 1e-12 * pb);
    const double db = 20.0 * std::log10(ma / mb);
    acc += db * db;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline Vector convolve(const Vector& a, const Vector& b) {
  const std::vector<double> r = convolve(std::vector<double>(a.data(), a.data() + a.size()),
                                         std::vector<double>(b.data(), b.data() + b.size()));
  return Eigen::Map<const Vector>(r.data(), static_cast<Index>(r.size()));
}

// Least-squares fit of theta over an explicit design matrix whose columns are
// vec(S^k), k = 1-M..K-1. Returns theta indexed from k = 1-M.
inline Vector toeplitz_lsq(const Matrix& f) {
  const Index m = f.rows(), k = f.cols();
  const Index p = m + k - 1;
  Matrix design = Matrix::Zero(m * k, p);
  for (Index t = 0; t < p; ++t) {
    const Index shift = t - (m - 1);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < m; ++i)
        if (j == i + shift) design(j * m + i, t) = 1.0;
  }
  const Vector target = Eigen::Map<const Vector>(f.data(), m * k);
  return design.colPivHouseholderQr().solve(target);
}

// Objective ||X - conv(f, G_n)||^2 summed over columns.
inline double factor_objective(const Matrix& x, const Vector& f, const Matrix& g) {
  double acc = 0.0;
  for (Index n = 0; n < x.cols(); ++n) {
    const Vector full = convolve(f, Vector(g.row(n).transpose()));
    for (Index i = 0; i < x.rows(); ++i) {
      const double r = x(i, n) - (i < full.size() ? full(i) : 0.0);
      acc += r * r;
    }
  }
  return acc;
}

// min g^T Q g - 2 c^T g + lambda sum(g), g >= 0, by enumerating every support
// and keeping the best feasible stationary point. K <= ~12.
inline Vector nnqp_enumerate(const Matrix& q, const Vector& c, double lambda) {
  const Index k = q.rows();
  Vector best = Vector::Zero(k);
  double best_obj = 0.0;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<Index> idx;
    for (Index i = 0; i < k; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const auto p = static_cast<Index>(idx.size());
    Matrix sub(p, p);
    Vector rhs(p);
    for (Index a = 0; a < p; ++a) {
      rhs(a) = c(idx[a]) - 0.5 * lambda;
      for (Index b = 0; b < p; ++b) sub(a, b) = q(idx[a], idx[b]);
    }
    const Vector sol = sub.fullPivLu().solve(rhs);
    if (!sol.allFinite() || (sol.array() < 0.0).any()) continue;
    Vector g = Vector::Zero(k);
    for (Index a = 0; a < p; ++a) g(idx[a]) = sol(a);
    const double obj = g.dot(q * g) - 2.0 * c.dot(g) + lambda * g.sum();
    if (obj < best_obj) {
      best_obj = obj;
      best = g;
    }
  }
  return best;
}

// Cyclic coordinate descent for min ||D (xhat - x)||^2 + lambda |xhat|_1.
inline Vector l1_ls_coordinate_descent(const Vector& x, const Matrix& d, double lambda, int sweeps = 20000) {
  const Matrix q = d.transpose() * d;
  const Vector c = q * x;
  Vector z = Vector::Zero(x.size());
  for (int s = 0; s < sweeps; ++s) {
    double delta = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      if (q(i, i) <= 0.0) continue;
      const double rest = c(i) - (q.row(i).dot(z) - q(i, i) * z(i));
      const double thr = 0.5 * lambda;
      double v = 0.0;
      if (rest > thr) v = (rest - thr) / q(i, i);
      else if (rest < -thr) v = (rest + thr) / q(i, i);
      delta = std::max(delta, std::abs(v - z(i)));
      z(i) = v;
    }
    if (delta < 1e-15) break;
  }
  return z;
}

// Synthetic exactly-factorizable data: X(:, n) = conv(f0, g0_n), g0 >= 0.
struct Synthetic {
  Matrix x;
  Vector f0;
  Matrix g0;
};

inline Synthetic make_synthetic(Index m, Index n, Index k, std::uint64_t seed, double density = 0.6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Synthetic s;
  const Index len = m - k + 1;
  s.f0.resize(len);
  for (Index d = 0; d < len; ++d) s.f0(d) = normal(rng) * std::exp(-0.15 * static_cast<double>(d));
  s.g0.resize(n, k);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < k; ++c) s.g0(r, c) = uni(rng) < density ? uni(rng) : 0.0;
  for (Index r = 0; r < n; ++r) s.g0(r, 0) += 0.5;
  s.x.resize(m, n);
  for (Index r = 0; r < n; ++r) s.x.col(r) = convolve(s.f0, Vector(s.g0.row(r).transpose())).head(m);
  return s;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Matrix random_nonneg(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = uni(rng);
  return m;
}

inline double rel_max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

}  // namespace oracle
