#pragma once

#include "toepnmf/kernels.hpp"
#include "toepnmf/model.hpp"
#include "toepnmf/signal_io.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace toepnmf {

enum class ConvMode { sparse_direct, dense_direct, fft_overlap_save };

std::string to_string(ConvMode mode);
ConvMode conv_mode_from_string(const std::string& name);

// A filter together with how to apply it. The dense and sparse views of the
// taps always describe the same filter.
class ConvPlan {
 public:
  // block_size 0 picks the default next_pow2(4 * len(taps)) for FFT mode.
  ConvPlan(ConvMode mode, std::vector<double> taps, std::size_t block_size = 0);
  ConvPlan(ConvMode mode, const SparseFilter& taps, std::size_t block_size = 0);

  ConvMode mode() const { return mode_; }
  std::size_t block_size() const { return block_size_; }
  const std::vector<double>& taps() const { return dense_; }
  const SparseFilter& sparse_taps() const { return sparse_; }

 private:
  void finish(std::size_t block_size);

  ConvMode mode_;
  std::vector<double> dense_;
  SparseFilter sparse_;
  std::size_t block_size_ = 0;
};

// Applies one plan to signals. Holds scratch buffers, so one instance per
// worker; the parallel flag selects the OpenMP kernels over the serial ones.
class Convolver {
 public:
  explicit Convolver(ConvPlan plan, bool parallel = true);

  std::vector<double> apply(std::span<const double> y);
  const ConvPlan& plan() const { return plan_; }
  // Multiply-adds issued by sparse_direct mode since construction.
  std::uint64_t sparse_macs() const { return sparse_macs_; }

 private:
  ConvPlan plan_;
  bool parallel_;
  std::optional<kernels::OverlapSavePlan> os_plan_;
  std::vector<Complex> scratch_;
  std::uint64_t sparse_macs_ = 0;
};

// Full linear convolution, length |y| + len(taps) - 1.
Signal convolve(const ConvPlan& plan, const Signal& y);

struct RenderCounters {
  std::uint64_t resonance_convolutions = 0;
  std::uint64_t reflection_convolutions = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t reflection_macs = 0;
};

// Two-stage renderer (y * f) * g_j. The resonance stage is computed once per
// source signal and reused for every direction rendered from it.
class Renderer {
 public:
  Renderer(FactorModel model, ConvMode mode);

  Signal render(const Signal& y, Index direction);
  const RenderCounters& counters() const { return counters_; }
  const FactorModel& model() const { return model_; }

 private:
  SparseFilter reflection(Index direction) const;

  FactorModel model_;
  ConvMode mode_;
  Convolver resonance_;
  std::optional<std::vector<double>> cached_source_;
  std::shared_ptr<const std::vector<double>> cached_resonance_;
  RenderCounters counters_;
};

// One-shot render; equals y * reconstruct(model, j) up to rounding.
Signal render(const FactorModel& model, const Signal& y, Index direction, ConvMode mode);

struct CostModel {
  std::size_t signal_len = 1;  // |y|
  std::size_t taps_nnze = 1;   // |x|
};

// Real flops per output sample for direct convolution: min(|x|, |y|).
double cost_per_sample_time_domain(const CostModel& c);
// Complex flops per output sample for FFT convolution:
// (68/9)(|y| log2|y| + |y|) / (|y| - |x| + 1).
double cost_per_sample_fft(const CostModel& c);
// The FFT figure expressed in real flops at 3 real per complex multiply-add.
double cost_per_sample_fft_real(const CostModel& c);
// Smallest |x| at which direct convolution is no longer cheaper than FFT
// convolution (raw figures), i.e. direct wins for |x| < the returned value.
std::size_t time_domain_crossover(std::size_t signal_len);

struct BenchRow {
  ConvMode mode;
  std::size_t signal_len;
  std::size_t nnze;
  std::size_t block_size;
  double ns_per_sample_median;
  double flops_model;
};

// Median wall-clock ns per output sample for each (nnze, mode). Filters have
// nnze non-zero taps spread over 2 * nnze taps.
std::vector<BenchRow> bench(std::size_t signal_len, const std::vector<std::size_t>& nnze_list, int repeats,
                            std::uint64_t seed = 1);

// mode,signal_len,nnze,block_size,ns_per_sample_median,flops_model
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace toepnmf
