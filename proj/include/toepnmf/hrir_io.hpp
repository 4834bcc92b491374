#pragma once

#include "toepnmf/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace toepnmf {

struct Direction {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

struct PreprocessFlags {
  bool minphase = false;
  bool delay_removed = false;
  bool normalized = false;
  // Onset criterion used when delay_removed is set.
  double onset_fraction = 0.1;

  bool all() const { return minphase && delay_removed && normalized; }
  bool operator==(const PreprocessFlags&) const = default;
};

inline constexpr double kDefaultOnsetFraction = 0.1;
// Tolerance on the unit absolute-sum invariant for sets held in double
// precision, and for sets read back from a float32 payload.
inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kNormToleranceF32 = 1e-5;

// A collection of HRIRs stored as columns of an M x N matrix (M taps, N
// directions). Construction validates every invariant; the value is
// immutable afterwards.
class HrirSet {
 public:
  HrirSet(Matrix data, int sample_rate_hz, std::vector<Direction> directions,
          PreprocessFlags flags = {}, double norm_tolerance = kNormTolerance);

  const Matrix& data() const { return data_; }
  Index num_taps() const { return data_.rows(); }
  Index num_directions() const { return data_.cols(); }
  int sample_rate_hz() const { return sample_rate_hz_; }
  const std::vector<Direction>& directions() const { return directions_; }
  const PreprocessFlags& flags() const { return flags_; }

 private:
  Matrix data_;
  int sample_rate_hz_;
  std::vector<Direction> directions_;
  PreprocessFlags flags_;
};

// Bundle: a directory with manifest.json and a little-endian float32 payload
// in direction-major order.
HrirSet load_bundle(const std::filesystem::path& dir);
void save_bundle(const HrirSet& set, const std::filesystem::path& dir);

// Matrix CSV with one HRIR per row (N rows x M columns) plus a directions CSV
// with "az_deg,el_deg" per row. A non-numeric first line is treated as header.
HrirSet load_csv(const std::filesystem::path& matrix_csv,
                 const std::filesystem::path& directions_csv, int sample_rate_hz);

// Minimum-phase equivalent via the folded real cepstrum.
std::vector<double> to_min_phase(std::span<const double> h);

std::vector<double> remove_onset_delay(std::span<const double> h,
                                       double threshold_fraction = kDefaultOnsetFraction);

std::vector<double> normalize_abs_sum(std::span<const double> h);

struct PreprocessOptions {
  bool minphase = true;
  bool remove_delay = true;
  bool normalize = true;
  double onset_fraction = kDefaultOnsetFraction;
};

// min-phase -> delay removal -> normalization, per direction. Flags already
// set on the input are kept.
HrirSet preprocess(const HrirSet& set, const PreprocessOptions& options = {});

}  // namespace toepnmf
