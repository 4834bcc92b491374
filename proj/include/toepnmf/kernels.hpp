#pragma once

#include "toepnmf/fft.hpp"
#include "toepnmf/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Hot loops of the library. Each kernel in this namespace runs on the OpenMP
// team (capped by set_max_threads); kernels::serial holds straightforward
// single-threaded references used by the tests and the benchmark.
namespace toepnmf::kernels {

// One multiplicative semi-NMF step on G (N x K) for fixed F (M x K).
Matrix update_g(const Matrix& x, const Matrix& f, const Matrix& g, double eps);

// Column j of the result is conv(f, g.row(j)) truncated to `taps` samples.
Matrix reconstruct(const Vector& f, const Matrix& g, Index taps);

// Full linear convolution with a sparse filter given as (index, value) pairs
// over a filter of `length` taps. Every output sample costs exactly
// indices.size() multiply-adds; the total is added to *macs when non-null.
std::vector<double> sparse_direct(std::span<const double> y, std::span<const Index> indices,
                                  std::span<const double> values, Index length,
                                  std::uint64_t* macs = nullptr);

std::vector<double> dense_direct(std::span<const double> y, std::span<const double> taps);

// Precomputed filter spectrum for overlap-save with FFT blocks of `block`
// samples; each block yields block - taps + 1 output samples.
class OverlapSavePlan {
 public:
  OverlapSavePlan(std::span<const double> taps, std::size_t block);

  std::size_t block() const { return block_; }
  std::size_t taps() const { return taps_; }
  std::size_t hop() const { return block_ - taps_ + 1; }
  const Fft& fft() const { return fft_; }
  const std::vector<Complex>& spectrum() const { return spectrum_; }

 private:
  std::size_t block_;
  std::size_t taps_;
  Fft fft_;
  std::vector<Complex> spectrum_;
};

std::vector<double> overlap_save(const OverlapSavePlan& plan, std::span<const double> y);

namespace serial {

Matrix update_g(const Matrix& x, const Matrix& f, const Matrix& g, double eps);
Matrix reconstruct(const Vector& f, const Matrix& g, Index taps);
std::vector<double> sparse_direct(std::span<const double> y, std::span<const Index> indices,
                                  std::span<const double> values, Index length,
                                  std::uint64_t* macs = nullptr);
std::vector<double> dense_direct(std::span<const double> y, std::span<const double> taps);
// Reuses `scratch` (resized to plan.block()) across blocks.
std::vector<double> overlap_save(const OverlapSavePlan& plan, std::span<const double> y,
                                 std::vector<Complex>& scratch);

}  // namespace serial
}  // namespace toepnmf::kernels
