#pragma once

#include "toepnmf/hrir_io.hpp"
#include "toepnmf/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace toepnmf {

// Pruned reflection filter: strictly increasing indices in [0, length) with
// positive values.
struct SparseFilter {
  std::vector<Index> indices;
  std::vector<double> values;
  Index length = 0;

  Index nnze() const { return static_cast<Index>(indices.size()); }
  Vector dense() const;
  // Throws DataError if the invariants above do not hold.
  void validate() const;
};

enum class TransformKind { identity, convolution, window };

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& name);

struct ResidualTransform {
  TransformKind kind = TransformKind::identity;
  double sigma = 0.0;  // ignored for identity
};

// Present on models whose G rows were re-solved with the sparsity penalty.
struct SparsityInfo {
  double lambda = 0.0;
  ResidualTransform transform;
  double prune_threshold = 1e-4;
  std::vector<SparseFilter> rows;
  std::vector<double> sd_db;
};

// Resonance filter f (length M-K+1) and non-negative reflection filters, one
// row of G (N x K) per direction. Every HRIR is approximated by f * G.row(j).
struct FactorModel {
  Vector f;
  Matrix G;
  Index num_taps = 0;        // M
  Index num_directions = 0;  // N
  Index filter_length = 0;   // K
  int sample_rate_hz = 0;
  std::uint64_t seed = 0;
  std::vector<double> training_log;  // RMSE after each iteration
  std::vector<Direction> directions;
  std::optional<SparsityInfo> sparsity;

  void validate() const;
};

}  // namespace toepnmf
