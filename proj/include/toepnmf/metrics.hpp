#pragma once

#include "toepnmf/hrir_io.hpp"
#include "toepnmf/model.hpp"

#include <filesystem>
#include <vector>

namespace toepnmf {

// sqrt(||X - Xhat||_F^2 / (M N)).
double rmse(const Matrix& x, const Matrix& xhat);

// Log-spectral distortion in dB over all M bins of the M-point DFT.
// Magnitudes are floored at 1e-12 of each spectrum's peak.
double spectral_distortion(const Vector& x, const Vector& xhat);

struct DirectionMetrics {
  Index index = 0;
  Direction direction;
  double rmse = 0.0;
  double sd_db = 0.0;
  Index nnze = 0;
};

struct PlaneSlice {
  std::vector<Index> members;
  double mean_sd_db = 0.0;
  double mean_nnze = 0.0;
};

struct EvalReport {
  std::vector<DirectionMetrics> per_direction;
  double mean_sd_db = 0.0;
  double mean_nnze = 0.0;
  double rmse_global = 0.0;
  PlaneSlice horizontal;  // |elevation| < 2.5 deg
  PlaneSlice median;      // |azimuth| < 2.5 deg
};

inline constexpr double kPlaneToleranceDeg = 2.5;

// NNZE counts entries above prune_threshold for dense models and the stored
// support for sparse ones.
EvalReport evaluate(const FactorModel& model, const HrirSet& set, double prune_threshold = 1e-4);

// direction_index, az_deg, el_deg, rmse, sd_db, nnze
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace toepnmf
