#include "toepnmf/convolution.hpp"

#include "toepnmf/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace toepnmf {

std::string to_string(ConvMode mode) {
  switch (mode) {
    case ConvMode::sparse_direct:
      return "sparse_direct";
    case ConvMode::dense_direct:
      return "dense_direct";
    case ConvMode::fft_overlap_save:
      return "fft_overlap_save";
  }
  return "sparse_direct";
}

ConvMode conv_mode_from_string(const std::string& name) {
  if (name == "sparse_direct" || name == "sparse") return ConvMode::sparse_direct;
  if (name == "dense_direct" || name == "dense") return ConvMode::dense_direct;
  if (name == "fft_overlap_save" || name == "fft") return ConvMode::fft_overlap_save;
  throw DimensionError("unknown convolution mode '" + name + "'");
}

ConvPlan::ConvPlan(ConvMode mode, std::vector<double> taps, std::size_t block_size)
    : mode_(mode), dense_(std::move(taps)) {
  if (dense_.empty()) throw DimensionError("ConvPlan: empty filter");
  for (double v : dense_)
    if (!std::isfinite(v)) throw DataError("ConvPlan: non-finite tap");
  sparse_.length = static_cast<Index>(dense_.size());
  for (std::size_t i = 0; i < dense_.size(); ++i)
    if (dense_[i] != 0.0) {
      sparse_.indices.push_back(static_cast<Index>(i));
      sparse_.values.push_back(dense_[i]);
    }
  finish(block_size);
}

ConvPlan::ConvPlan(ConvMode mode, const SparseFilter& taps, std::size_t block_size)
    : mode_(mode), sparse_(taps) {
  if (taps.length < 1) throw DimensionError("ConvPlan: empty filter");
  if (taps.indices.size() != taps.values.size()) throw DimensionError("ConvPlan: indices/values mismatch");
  const Vector d = taps.dense();
  dense_.assign(d.data(), d.data() + d.size());
  finish(block_size);
}

void ConvPlan::finish(std::size_t block_size) {
  if (mode_ != ConvMode::fft_overlap_save) {
    block_size_ = 0;
    return;
  }
  block_size_ = block_size == 0 ? next_pow2(4 * dense_.size()) : block_size;
  if (block_size_ < dense_.size()) throw DimensionError("ConvPlan: block size shorter than filter");
  if (!is_pow2(block_size_)) throw DimensionError("ConvPlan: block size must be a power of two");
}

Convolver::Convolver(ConvPlan plan, bool parallel) : plan_(std::move(plan)), parallel_(parallel) {
  if (plan_.mode() == ConvMode::fft_overlap_save) {
    os_plan_.emplace(plan_.taps(), plan_.block_size());
    scratch_.resize(plan_.block_size());
  }
}

std::vector<double> Convolver::apply(std::span<const double> y) {
  if (y.empty()) throw DimensionError("convolve: empty signal");
  switch (plan_.mode()) {
    case ConvMode::sparse_direct: {
      const auto& s = plan_.sparse_taps();
      return parallel_ ? kernels::sparse_direct(y, s.indices, s.values, s.length, &sparse_macs_)
                       : kernels::serial::sparse_direct(y, s.indices, s.values, s.length, &sparse_macs_);
    }
    case ConvMode::dense_direct:
      return parallel_ ? kernels::dense_direct(y, plan_.taps()) : kernels::serial::dense_direct(y, plan_.taps());
    case ConvMode::fft_overlap_save:
      return parallel_ ? kernels::overlap_save(*os_plan_, y) : kernels::serial::overlap_save(*os_plan_, y, scratch_);
  }
  return {};
}

Signal convolve(const ConvPlan& plan, const Signal& y) {
  Convolver conv(plan);
  return Signal(conv.apply(y.samples()), y.sample_rate_hz());
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Renderer::Renderer(FactorModel model, ConvMode mode)
    : model_(std::move(model)), mode_(mode), resonance_(ConvPlan(mode, to_std(model_.f))) {
  model_.validate();
}

SparseFilter Renderer::reflection(Index direction) const {
  if (direction < 0 || direction >= model_.num_directions)
    throw DimensionError("render: direction index " + std::to_string(direction) + " out of range");
  if (model_.sparsity) return model_.sparsity->rows[static_cast<std::size_t>(direction)];
  SparseFilter s;
  s.length = model_.filter_length;
  for (Index k = 0; k < model_.filter_length; ++k)
    if (model_.G(direction, k) > 0.0) {
      s.indices.push_back(k);
      s.values.push_back(model_.G(direction, k));
    }
  return s;
}

Signal Renderer::render(const Signal& y, Index direction) {
  const SparseFilter g = reflection(direction);
  if (y.size() == 0) throw DimensionError("render: empty signal");
  if (cached_source_ && *cached_source_ == y.samples()) {
    ++counters_.cache_hits;
  } else {
    cached_resonance_ = std::make_shared<const std::vector<double>>(resonance_.apply(y.samples()));
    cached_source_ = y.samples();
    ++counters_.resonance_convolutions;
  }
  Convolver stage(ConvPlan(mode_, g));
  auto out = stage.apply(*cached_resonance_);
  ++counters_.reflection_convolutions;
  counters_.reflection_macs += stage.sparse_macs();
  return Signal(std::move(out), y.sample_rate_hz());
}

Signal render(const FactorModel& model, const Signal& y, Index direction, ConvMode mode) {
  Renderer r(model, mode);
  return r.render(y, direction);
}

double cost_per_sample_time_domain(const CostModel& c) {
  if (c.signal_len < 1 || c.taps_nnze < 1) throw DimensionError("cost model: lengths must be >= 1");
  return static_cast<double>(std::min(c.signal_len, c.taps_nnze));
}

double cost_per_sample_fft(const CostModel& c) {
  if (c.signal_len < 1 || c.taps_nnze < 1) throw DimensionError("cost model: lengths must be >= 1");
  if (c.signal_len < c.taps_nnze) throw DimensionError("cost model: FFT formula needs |y| >= |x|");
  const auto y = static_cast<double>(c.signal_len);
  const auto x = static_cast<double>(c.taps_nnze);
  return (68.0 / 9.0) * (y * std::log2(y) + y) / (y - x + 1.0);
}

double cost_per_sample_fft_real(const CostModel& c) { return 3.0 * cost_per_sample_fft(c); }

std::size_t time_domain_crossover(std::size_t signal_len) {
  for (std::size_t x = 1; x <= signal_len; ++x)
    if (!(cost_per_sample_time_domain({signal_len, x}) < cost_per_sample_fft({signal_len, x}))) return x;
  return signal_len + 1;
}

std::vector<BenchRow> bench(std::size_t signal_len, const std::vector<std::size_t>& nnze_list, int repeats,
                            std::uint64_t seed) {
  if (repeats < 3) throw DimensionError("bench: repeats must be >= 3");
  if (signal_len < 1) throw DimensionError("bench: signal length must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> y(signal_len);
  for (auto& v : y) v = normal(rng);

  std::vector<BenchRow> rows;
  for (std::size_t nnze : nnze_list) {
    if (nnze < 1) throw DimensionError("bench: nnze must be >= 1");
    const std::size_t len = 2 * nnze;
    std::vector<std::size_t> positions(len - 1);
    std::iota(positions.begin(), positions.end(), 1);
    std::shuffle(positions.begin(), positions.end(), rng);
    std::vector<double> taps(len, 0.0);
    taps[0] = 1.0 + std::abs(normal(rng));
    for (std::size_t i = 0; i + 1 < nnze; ++i) taps[positions[i]] = 1.0 + std::abs(normal(rng));

    for (ConvMode mode : {ConvMode::sparse_direct, ConvMode::dense_direct, ConvMode::fft_overlap_save}) {
      Convolver conv(ConvPlan(mode, taps));
      std::vector<double> ns;
      std::size_t out_len = signal_len + len - 1;
      for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto out = conv.apply(y);
        const auto t1 = std::chrono::steady_clock::now();
        out_len = out.size();
        ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() / static_cast<double>(out_len));
      }
      std::nth_element(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(ns.size() / 2), ns.end());
      BenchRow row{mode, signal_len, nnze, conv.plan().block_size(), ns[ns.size() / 2], 0.0};
      switch (mode) {
        case ConvMode::sparse_direct:
          row.flops_model = cost_per_sample_time_domain({signal_len, nnze});
          break;
        case ConvMode::dense_direct:
          row.flops_model = cost_per_sample_time_domain({signal_len, len});
          break;
        case ConvMode::fft_overlap_save:
          row.flops_model = signal_len >= len ? cost_per_sample_fft({signal_len, len}) : NAN;
          break;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "mode,signal_len,nnze,block_size,ns_per_sample_median,flops_model\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.17g,%.17g\n", to_string(r.mode).c_str(), r.signal_len, r.nnze,
                  r.block_size, r.ns_per_sample_median, r.flops_model);
    out << buf;
  }
  return out.str();
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << bench_csv(rows);
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace toepnmf
