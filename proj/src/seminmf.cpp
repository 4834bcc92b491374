#include "toepnmf/seminmf.hpp"

#include "toepnmf/error.hpp"
#include "toepnmf/kernels.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <string>

namespace toepnmf {

namespace {

// Uniform on (0, 1].
double draw_positive(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return 1.0 - u(rng);
}

double rmse_of(const Matrix& x, const Vector& f, const Matrix& g) {
  return std::sqrt(factor_objective(x, f, g) / static_cast<double>(x.size()));
}

}  // namespace

Matrix update_G(const Matrix& x, const Matrix& f, const Matrix& g, double eps) {
  if ((g.array() < 0.0).any()) throw DataError("update_G: G has negative entries");
  return kernels::update_g(x, f, g, eps);
}

ToeplitzParams solve_resonance(const Matrix& x, const Matrix& g, double ridge) {
  const Index m = x.rows();
  const Index k = g.cols();
  if (g.rows() != x.cols()) throw DimensionError("solve_resonance: G must have one row per column of X");
  if (k < 1 || k > m) throw DimensionError("solve_resonance: need 1 <= K <= M");
  if ((g.array() < 0.0).any()) throw DataError("solve_resonance: G has negative entries");
  const Index len = m - k + 1;

  const Matrix gtg = g.transpose() * g;
  const Matrix xg = x * g;
  // A is symmetric Toeplitz with band K: A(d, e) = sum of diagonal |d-e| of G^T G.
  Vector band = Vector::Zero(len);
  for (Index off = 0; off < std::min(k, len); ++off) band(off) = diagonal_sum(gtg, off);
  if (band(0) <= 0.0) throw NumericalError("solve_resonance: G is identically zero");
  Matrix a(len, len);
  for (Index d = 0; d < len; ++d)
    for (Index e = 0; e < len; ++e) a(d, e) = band(std::abs(d - e));
  Vector b(len);
  for (Index d = 0; d < len; ++d) b(d) = diagonal_sum(xg, -d);

  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    const double shift = ridge * a.trace() / static_cast<double>(len);
    a.diagonal().array() += shift;
    llt.compute(a);
    if (llt.info() != Eigen::Success)
      throw NumericalError("solve_resonance: resonance system singular after ridge (degenerate G)");
  }
  const Vector f = llt.solve(b);
  if (!f.allFinite()) throw NumericalError("solve_resonance: non-finite solution");
  return ToeplitzParams::from_filter(f, k);
}

double factor_objective(const Matrix& x, const Vector& f, const Matrix& g) {
  return (x - kernels::reconstruct(f, g, x.rows())).squaredNorm();
}

FactorModel train(const HrirSet& set, const TrainConfig& config) {
  const Matrix& x = set.data();
  const Index m = x.rows();
  const Index n = x.cols();
  const Index k = config.filter_length;
  if (k < 1 || k > m)
    throw DimensionError("train: filter length K=" + std::to_string(k) + " must satisfy 1 <= K <= M=" +
                         std::to_string(m));
  if (config.iterations < 1) throw DimensionError("train: iterations must be >= 1");
  if (config.epsilon_denom < 0.0 || config.ridge < 0.0)
    throw DimensionError("train: epsilon_denom and ridge must be non-negative");
  if (config.warn_unpreprocessed && !set.flags().all())
    std::clog << "warning: training on an HRIR set that is not fully preprocessed\n";

  std::mt19937_64 rng(config.seed);
  Matrix g(n, k);
  for (Index c = 0; c < k; ++c)
    for (Index r = 0; r < n; ++r) g(r, c) = draw_positive(rng);
  std::vector<bool> redrawn(static_cast<std::size_t>(n), false);

  FactorModel model;
  model.num_taps = m;
  model.num_directions = n;
  model.filter_length = k;
  model.sample_rate_hz = set.sample_rate_hz();
  model.seed = config.seed;
  model.directions = set.directions();

  int stalled = 0;
  for (int t = 0; t < config.iterations; ++t) {
    const ToeplitzParams theta = solve_resonance(x, g, config.ridge);
    const Matrix f_mat = toeplitz_from_params(theta);
    g = kernels::update_g(x, f_mat, g, config.epsilon_denom);
    for (Index r = 0; r < n; ++r) {
      if (g.row(r).sum() > 0.0) continue;
      // A zero row with F^T x_r <= 0 is the optimal row for this F and a
      // fixed point of the update; redrawing it would raise the residual.
      const Vector corr = f_mat.transpose() * x.col(r);
      if (corr.maxCoeff() <= 1e-12 * std::max(1.0, corr.cwiseAbs().maxCoeff())) continue;
      if (redrawn[static_cast<std::size_t>(r)])
        throw NumericalError("train: row " + std::to_string(r) + " of G collapsed to zero again at iteration " +
                             std::to_string(t + 1));
      redrawn[static_cast<std::size_t>(r)] = true;
      // Random positive direction, scaled to its best non-negative multiple
      // so the residual of this row cannot grow.
      Vector u(k);
      for (Index c = 0; c < k; ++c) u(c) = draw_positive(rng);
      const Vector fu = f_mat * u;
      const double norm2 = fu.squaredNorm();
      const double alpha = norm2 > 0.0 ? std::max(0.0, fu.dot(x.col(r))) / norm2 : 0.0;
      g.row(r) = (alpha * u).transpose();
    }
    model.f = theta.resonance_filter();
    const double rmse = rmse_of(x, model.f, g);
    if (!std::isfinite(rmse)) throw NumericalError("train: RMSE became non-finite");
    if (!model.training_log.empty() && model.training_log.back() - rmse < 1e-10)
      ++stalled;
    else
      stalled = 0;
    model.training_log.push_back(rmse);
    if (config.early_stop && stalled >= 3) break;
  }
  model.G = std::move(g);
  return model;
}

Vector reconstruct(const FactorModel& model, Index direction) {
  if (direction < 0 || direction >= model.num_directions)
    throw DimensionError("reconstruct: direction index " + std::to_string(direction) + " out of range");
  const Vector full = convolve_full(model.f, model.G.row(direction).transpose());
  Vector out = Vector::Zero(model.num_taps);
  const Index len = std::min<Index>(model.num_taps, full.size());
  out.head(len) = full.head(len);
  return out;
}

Matrix reconstruct_all(const FactorModel& model) {
  return kernels::reconstruct(model.f, model.G, model.num_taps);
}

}  // namespace toepnmf
