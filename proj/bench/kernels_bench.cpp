// Serial reference kernels against their OpenMP counterparts.

#include "toepnmf/kernels.hpp"
#include "toepnmf/parallel.hpp"
#include "toepnmf/types.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace toepnmf;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed, bool nonneg = false) {
  const auto v = random_vec(static_cast<std::size_t>(r * c), seed);
  Matrix m = Eigen::Map<const Matrix>(v.data(), r, c);
  return nonneg ? Matrix(m.cwiseAbs()) : m;
}

// HRIR-set-sized problem: 200 taps, 1250 directions, K = 25.
struct UpdateFixture {
  Matrix x = random_matrix(200, 1250, 1);
  Matrix f = random_matrix(200, 25, 2);
  Matrix g = random_matrix(1250, 25, 3, true);
};

void BM_update_g_serial(benchmark::State& state) {
  const UpdateFixture d;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::update_g(d.x, d.f, d.g, 1e-12));
}

void BM_update_g_parallel(benchmark::State& state) {
  const UpdateFixture d;
  set_max_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::update_g(d.x, d.f, d.g, 1e-12));
  set_max_threads(0);
}

void BM_reconstruct_serial(benchmark::State& state) {
  const Vector f = random_matrix(176, 1, 4);
  const Matrix g = random_matrix(1250, 25, 5, true);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::reconstruct(f, g, 200));
}

void BM_reconstruct_parallel(benchmark::State& state) {
  const Vector f = random_matrix(176, 1, 4);
  const Matrix g = random_matrix(1250, 25, 5, true);
  set_max_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reconstruct(f, g, 200));
  set_max_threads(0);
}

struct SparseFixture {
  std::vector<double> y = random_vec(44100, 6);
  std::vector<Index> idx;
  std::vector<double> val;
  explicit SparseFixture(Index nnze) {
    for (Index i = 0; i < nnze; ++i) idx.push_back(2 * i);
    val = random_vec(static_cast<std::size_t>(nnze), 7);
  }
};

void BM_sparse_direct_serial(benchmark::State& state) {
  const SparseFixture d(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(kernels::serial::sparse_direct(d.y, d.idx, d.val, 2 * state.range(0)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.y.size()));
}

void BM_sparse_direct_parallel(benchmark::State& state) {
  const SparseFixture d(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sparse_direct(d.y, d.idx, d.val, 2 * state.range(0)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.y.size()));
}

void BM_dense_direct_serial(benchmark::State& state) {
  const auto y = random_vec(44100, 8);
  const auto taps = random_vec(static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::dense_direct(y, taps));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

void BM_dense_direct_parallel(benchmark::State& state) {
  const auto y = random_vec(44100, 8);
  const auto taps = random_vec(static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dense_direct(y, taps));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

void BM_overlap_save_serial(benchmark::State& state) {
  const auto y = random_vec(44100, 10);
  const auto taps = random_vec(static_cast<std::size_t>(state.range(0)), 11);
  const kernels::OverlapSavePlan plan(taps, next_pow2(4 * taps.size()));
  std::vector<Complex> scratch;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::overlap_save(plan, y, scratch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

void BM_overlap_save_parallel(benchmark::State& state) {
  const auto y = random_vec(44100, 10);
  const auto taps = random_vec(static_cast<std::size_t>(state.range(0)), 11);
  const kernels::OverlapSavePlan plan(taps, next_pow2(4 * taps.size()));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::overlap_save(plan, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

}  // namespace

BENCHMARK(BM_update_g_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_update_g_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reconstruct_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reconstruct_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sparse_direct_serial)->Arg(4)->Arg(25)->Arg(128);
BENCHMARK(BM_sparse_direct_parallel)->Arg(4)->Arg(25)->Arg(128);
BENCHMARK(BM_dense_direct_serial)->Arg(25)->Arg(200);
BENCHMARK(BM_dense_direct_parallel)->Arg(25)->Arg(200);
BENCHMARK(BM_overlap_save_serial)->Arg(25)->Arg(200)->Arg(1024);
BENCHMARK(BM_overlap_save_parallel)->Arg(25)->Arg(200)->Arg(1024);

BENCHMARK_MAIN();
