#pragma once

#include "toepnmf/hrir_io.hpp"
#include "toepnmf/model.hpp"

#include <vector>

namespace toepnmf {

inline constexpr double kDefaultPruneThreshold = 1e-4;

// Residual weighting D (M x M): identity; Toeplitz Gaussian kernel with
// theta_k = N_sigma(k) (convolution); or diag(exp(-i^2 / sigma^2)) (window).
Matrix build_transform(const ResidualTransform& t, Index size);

struct NnlsOptions {
  double rel_tolerance = 1e-10;
  int max_iterations = 100000;
};

// Solver for min_g ||D (F g - x)||^2 + lambda * sum(g), g >= 0, with the
// Gram matrix of D F precomputed so repeated right-hand sides are cheap.
//
// Accelerated proximal gradient (FISTA) runs to the relative-objective
// stopping rule; an active-set pass warm-started from its support then makes
// the result exact up to the linear solves.
class L1NnlsSolver {
 public:
  L1NnlsSolver(const Matrix& f, const Matrix& d, NnlsOptions options = {});

  Vector solve(const Vector& x, double lambda) const;

  double objective(const Vector& g, const Vector& x, double lambda) const;
  // Largest KKT violation divided by (1 + |2 c|_inf + lambda), c = (DF)^T D x.
  double kkt_residual(const Vector& g, const Vector& x, double lambda) const;
  // Smallest lambda for which g = 0 is optimal.
  double lambda_max(const Vector& x) const;

  Index size() const { return gram_.rows(); }

 private:
  Vector linear_term(const Vector& x) const;
  Vector fista(const Vector& c, double lambda) const;
  Vector active_set(const Vector& c, double lambda, const Vector& warm) const;

  Matrix df_;    // D F
  Matrix d_;     // D
  Matrix gram_;  // (D F)^T (D F)
  double lipschitz_;
  NnlsOptions options_;
};

Vector l1_nnls(const Matrix& f, const Vector& x, const Matrix& d, double lambda);

// min_xhat ||D (xhat - x)||^2 + lambda |xhat|_1 without a sign constraint.
// Closed-form soft threshold for diagonal D, FISTA otherwise.
Vector l1_ls_baseline(const Vector& x, const Matrix& d, double lambda);

// Keeps entries strictly greater than threshold.
SparseFilter prune(const Vector& g, double threshold = kDefaultPruneThreshold);

// Re-solves every row of G with the resonance filter held fixed, prunes it,
// and records per-direction NNZE and spectral distortion.
FactorModel sparsify_model(const FactorModel& model, const HrirSet& set, double lambda,
                           const ResidualTransform& transform,
                           double threshold = kDefaultPruneThreshold);

struct SigmaChoice {
  double sigma = 0.0;
  double sd_db = 0.0;
};

// 15, 17, ..., 63, 100, 160, 250.
std::vector<double> default_sigma_grid();

// Window-transform bandwidth minimizing the spectral distortion of direction
// j's pruned reconstruction. Ties go to the smaller sigma.
SigmaChoice tune_sigma(const FactorModel& model, const HrirSet& set, Index direction,
                       const std::vector<double>& grid, double lambda = 0.0,
                       double threshold = kDefaultPruneThreshold);

// Spectral distortion of direction j when its row is re-solved with the
// given transform and pruned.
double resolved_sd(const FactorModel& model, const HrirSet& set, Index direction,
                   const ResidualTransform& transform, double lambda = 0.0,
                   double threshold = kDefaultPruneThreshold);

}  // namespace toepnmf
