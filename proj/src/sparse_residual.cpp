#include "toepnmf/sparse_residual.hpp"

#include "toepnmf/error.hpp"
#include "toepnmf/metrics.hpp"
#include "toepnmf/parallel.hpp"
#include "toepnmf/toeplitz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace toepnmf {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + ": non-finite input");
}

double power_iteration(const Matrix& q) {
  if (q.rows() == 0) return 0.0;
  Vector v = Vector::Ones(q.rows()) / std::sqrt(static_cast<double>(q.rows()));
  double estimate = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const Vector w = q * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(norm - estimate) <= 1e-12 * norm) {
      estimate = norm;
      break;
    }
    estimate = norm;
  }
  return estimate;
}

bool is_diagonal(const Matrix& d) {
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < d.rows(); ++i)
      if (i != j && d(i, j) != 0.0) return false;
  return true;
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

Matrix build_transform(const ResidualTransform& t, Index size) {
  if (size < 1) throw DimensionError("build_transform: size must be positive");
  if (t.kind == TransformKind::identity) return Matrix::Identity(size, size);
  if (!(t.sigma > 0.0) || !std::isfinite(t.sigma))
    throw DimensionError("build_transform: sigma must be positive for " + to_string(t.kind));
  const double s = t.sigma;
  if (t.kind == TransformKind::window) {
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = std::exp(-static_cast<double>(i * i) / (s * s));
    return v.asDiagonal();
  }
  const double norm = 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
  Matrix d(size, size);
  for (Index j = 0; j < size; ++j)
    for (Index i = 0; i < size; ++i) {
      const auto k = static_cast<double>(j - i);
      d(i, j) = norm * std::exp(-k * k / (2.0 * s * s));
    }
  return d;
}

L1NnlsSolver::L1NnlsSolver(const Matrix& f, const Matrix& d, NnlsOptions options)
    : options_(options) {
  if (d.cols() != f.rows()) throw DimensionError("l1_nnls: D must have M columns");
  require_finite(f, "l1_nnls");
  require_finite(d, "l1_nnls");
  df_ = d * f;
  d_ = d;
  gram_ = df_.transpose() * df_;
  lipschitz_ = 2.0 * power_iteration(gram_) * (1.0 + 1e-6);
}

Vector L1NnlsSolver::linear_term(const Vector& x) const {
  if (x.size() != d_.cols()) throw DimensionError("l1_nnls: x has wrong length");
  if (!x.allFinite()) throw DataError("l1_nnls: non-finite input");
  return df_.transpose() * (d_ * x);
}

double L1NnlsSolver::objective(const Vector& g, const Vector& x, double lambda) const {
  return (df_ * g - d_ * x).squaredNorm() + lambda * g.sum();
}

double L1NnlsSolver::kkt_residual(const Vector& g, const Vector& x, double lambda) const {
  const Vector c = linear_term(x);
  const Vector grad = 2.0 * (gram_ * g - c).array() + lambda;
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    if (g(i) < 0.0) worst = std::max(worst, -g(i));
    worst = std::max(worst, g(i) > 0.0 ? std::abs(grad(i)) : -grad(i));
  }
  return worst / (1.0 + 2.0 * c.cwiseAbs().maxCoeff() + lambda);
}

double L1NnlsSolver::lambda_max(const Vector& x) const {
  return std::max(0.0, 2.0 * linear_term(x).maxCoeff());
}

Vector L1NnlsSolver::fista(const Vector& c, double lambda) const {
  const Index k = gram_.rows();
  Vector g = Vector::Zero(k);
  if (lipschitz_ == 0.0) return g;
  const double step = 1.0 / lipschitz_;
  // Objective up to the constant ||D x||^2.
  auto partial = [&](const Vector& v) { return v.dot(gram_ * v) - 2.0 * c.dot(v) + lambda * v.sum(); };
  Vector z = g;
  double t = 1.0;
  double prev = partial(g);
  const double constant_scale = std::max(1e-300, c.cwiseAbs().sum());
  for (int it = 0; it < options_.max_iterations; ++it) {
    const Vector grad = 2.0 * (gram_ * z - c);
    Vector next = (z - step * grad).array() - lambda * step;
    next = next.cwiseMax(0.0);
    const double obj = partial(next);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (obj > prev) {
      // Adaptive restart: drop momentum when the objective goes up.
      z = g;
      t = 1.0;
      continue;
    }
    z = next + ((t - 1.0) / t_next) * (next - g);
    g = std::move(next);
    t = t_next;
    const double change = std::abs(prev - obj);
    prev = obj;
    if (change <= options_.rel_tolerance * std::max(std::abs(obj), 1e-12 * constant_scale)) break;
  }
  return g;
}

Vector L1NnlsSolver::active_set(const Vector& c, double lambda, const Vector& warm) const {
  const Index k = gram_.rows();
  const Vector rhs = c.array() - 0.5 * lambda;
  const double tol = 1e-14 * (1.0 + c.cwiseAbs().maxCoeff() + lambda);
  std::vector<bool> passive(static_cast<std::size_t>(k));
  Vector g = Vector::Zero(k);
  for (Index i = 0; i < k; ++i)
    if (warm(i) > 0.0) {
      passive[static_cast<std::size_t>(i)] = true;
      g(i) = warm(i);
    }

  auto solve_passive = [&]() {
    std::vector<Index> idx;
    for (Index i = 0; i < k; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    Vector z = Vector::Zero(k);
    if (idx.empty()) return z;
    const auto p = static_cast<Index>(idx.size());
    Matrix sub(p, p);
    Vector r(p);
    for (Index a = 0; a < p; ++a) {
      r(a) = rhs(idx[a]);
      for (Index b = 0; b < p; ++b) sub(a, b) = gram_(idx[a], idx[b]);
    }
    const Vector sol = sub.ldlt().solve(r);
    for (Index a = 0; a < p; ++a) z(idx[a]) = sol(a);
    return z;
  };

  const int max_outer = static_cast<int>(4 * k + 20);
  for (int outer = 0; outer < max_outer; ++outer) {
    for (int inner = 0; inner <= k; ++inner) {
      const Vector z = solve_passive();
      bool feasible = true;
      double alpha = 1.0;
      for (Index i = 0; i < k; ++i) {
        if (!passive[static_cast<std::size_t>(i)] || z(i) > 0.0) continue;
        feasible = false;
        const double denom = g(i) - z(i);
        if (denom > 0.0) alpha = std::min(alpha, g(i) / denom);
      }
      if (feasible) {
        g = z;
        break;
      }
      g += alpha * (z - g);
      for (Index i = 0; i < k; ++i)
        if (passive[static_cast<std::size_t>(i)] && g(i) <= 0.0) {
          passive[static_cast<std::size_t>(i)] = false;
          g(i) = 0.0;
        }
    }
    const Vector w = rhs - gram_ * g;
    Index best = -1;
    double best_w = tol;
    for (Index i = 0; i < k; ++i)
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
  }
  return g;
}

Vector L1NnlsSolver::solve(const Vector& x, double lambda) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("l1_nnls: lambda must be finite and >= 0");
  const Vector c = linear_term(x);
  const Vector warm = fista(c, lambda);
  const Vector polished = active_set(c, lambda, warm);
  if (polished.allFinite() && (polished.array() >= 0.0).all() &&
      objective(polished, x, lambda) <= objective(warm, x, lambda) + 1e-15 * (1.0 + std::abs(objective(warm, x, lambda))))
    return polished;
  return warm;
}

Vector l1_nnls(const Matrix& f, const Vector& x, const Matrix& d, double lambda) {
  return L1NnlsSolver(f, d).solve(x, lambda);
}

Vector l1_ls_baseline(const Vector& x, const Matrix& d, double lambda) {
  if (d.cols() != x.size()) throw DimensionError("l1_ls_baseline: D must have len(x) columns");
  if (!x.allFinite() || !d.allFinite()) throw DataError("l1_ls_baseline: non-finite input");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("l1_ls_baseline: lambda must be finite and >= 0");
  const Index m = x.size();
  Vector out = Vector::Zero(m);
  if (is_diagonal(d) && d.rows() == d.cols()) {
    for (Index i = 0; i < m; ++i) {
      const double w = d(i, i) * d(i, i);
      if (w > 0.0) out(i) = soft(x(i), lambda / (2.0 * w));
    }
    return out;
  }
  const Matrix gram = d.transpose() * d;
  const Vector c = gram * x;
  const double lip = 2.0 * power_iteration(gram) * (1.0 + 1e-6);
  if (lip == 0.0) return out;
  const double step = 1.0 / lip;
  auto partial = [&](const Vector& v) { return v.dot(gram * v) - 2.0 * c.dot(v) + lambda * v.cwiseAbs().sum(); };
  Vector z = out;
  double t = 1.0;
  double prev = partial(out);
  for (int it = 0; it < 100000; ++it) {
    const Vector v = z - step * 2.0 * (gram * z - c);
    Vector next(m);
    for (Index i = 0; i < m; ++i) next(i) = soft(v(i), lambda * step);
    const double obj = partial(next);
    if (obj > prev) {
      z = out;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - out);
    out = std::move(next);
    t = t_next;
    const double change = std::abs(prev - obj);
    prev = obj;
    if (change <= 1e-12 * std::max(std::abs(obj), 1e-300)) break;
  }
  // Exact solve on the detected support and sign pattern.
  std::vector<Index> idx;
  for (Index i = 0; i < m; ++i)
    if (out(i) != 0.0) idx.push_back(i);
  if (!idx.empty()) {
    const auto p = static_cast<Index>(idx.size());
    Matrix sub(p, p);
    Vector r(p);
    for (Index a = 0; a < p; ++a) {
      r(a) = c(idx[a]) - 0.5 * lambda * (out(idx[a]) > 0.0 ? 1.0 : -1.0);
      for (Index b = 0; b < p; ++b) sub(a, b) = gram(idx[a], idx[b]);
    }
    const Vector sol = sub.ldlt().solve(r);
    Vector candidate = Vector::Zero(m);
    bool consistent = sol.allFinite();
    for (Index a = 0; a < p && consistent; ++a) {
      candidate(idx[a]) = sol(a);
      consistent = (sol(a) > 0.0) == (out(idx[a]) > 0.0) && sol(a) != 0.0;
    }
    if (consistent && partial(candidate) <= partial(out)) out = candidate;
  }
  return out;
}

SparseFilter prune(const Vector& g, double threshold) {
  SparseFilter s;
  s.length = g.size();
  for (Index i = 0; i < g.size(); ++i)
    if (g(i) > threshold && g(i) > 0.0) {
      s.indices.push_back(i);
      s.values.push_back(g(i));
    }
  return s;
}

namespace {

void check_model_matches(const FactorModel& model, const HrirSet& set) {
  if (set.num_taps() != model.num_taps || set.num_directions() != model.num_directions)
    throw DimensionError("model and HRIR set dimensions differ");
  if (model.f.size() == 0 || model.f.isZero(0.0))
    throw DataError("model has no trained resonance filter");
}

Matrix resonance_matrix(const FactorModel& model) {
  return toeplitz_from_params(ToeplitzParams::from_filter(model.f, model.filter_length));
}

double pruned_sd(const FactorModel& model, const Vector& x, const SparseFilter& row) {
  const Vector full = convolve_full(model.f, row.dense());
  const Vector xhat = full.head(model.num_taps);
  if (xhat.isZero(0.0)) return INFINITY;
  return spectral_distortion(x, xhat);
}

}  // namespace

FactorModel sparsify_model(const FactorModel& model, const HrirSet& set, double lambda,
                           const ResidualTransform& transform, double threshold) {
  check_model_matches(model, set);
  if (threshold < 0.0) throw DimensionError("sparsify_model: prune threshold must be >= 0");
  const L1NnlsSolver solver(resonance_matrix(model), build_transform(transform, model.num_taps));
  SparsityInfo info;
  info.lambda = lambda;
  info.transform = transform;
  info.prune_threshold = threshold;
  info.rows.resize(static_cast<std::size_t>(model.num_directions));
  info.sd_db.resize(static_cast<std::size_t>(model.num_directions));
  const Matrix& x = set.data();
  parallel_for(model.num_directions, [&](Index j) {
    const Vector g = solver.solve(x.col(j), lambda);
    auto row = prune(g, threshold);
    info.sd_db[static_cast<std::size_t>(j)] = pruned_sd(model, x.col(j), row);
    info.rows[static_cast<std::size_t>(j)] = std::move(row);
  });
  FactorModel out = model;
  for (Index j = 0; j < model.num_directions; ++j)
    out.G.row(j) = info.rows[static_cast<std::size_t>(j)].dense().transpose();
  out.sparsity = std::move(info);
  return out;
}

std::vector<double> default_sigma_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 25; ++i) grid.push_back(15.0 + 2.0 * i);
  grid.insert(grid.end(), {100.0, 160.0, 250.0});
  return grid;
}

double resolved_sd(const FactorModel& model, const HrirSet& set, Index direction,
                   const ResidualTransform& transform, double lambda, double threshold) {
  check_model_matches(model, set);
  if (direction < 0 || direction >= model.num_directions)
    throw DimensionError("direction index out of range");
  const L1NnlsSolver solver(resonance_matrix(model), build_transform(transform, model.num_taps));
  const Vector x = set.data().col(direction);
  return pruned_sd(model, x, prune(solver.solve(x, lambda), threshold));
}

SigmaChoice tune_sigma(const FactorModel& model, const HrirSet& set, Index direction,
                       const std::vector<double>& grid, double lambda, double threshold) {
  if (grid.empty()) throw DimensionError("tune_sigma: empty sigma grid");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  SigmaChoice best{sorted.front(), 0.0};
  bool first = true;
  for (double sigma : sorted) {
    const double sd = resolved_sd(model, set, direction, {TransformKind::window, sigma}, lambda, threshold);
    if (first || sd < best.sd_db) {
      best = {sigma, sd};
      first = false;
    }
  }
  return best;
}

}  // namespace toepnmf
