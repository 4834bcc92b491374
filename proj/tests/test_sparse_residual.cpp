#include "oracles.hpp"
#include "toepnmf/error.hpp"
#include "toepnmf/seminmf.hpp"
#include "toepnmf/metrics.hpp"
#include "toepnmf/model_io.hpp"
#include "toepnmf/sparse_residual.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace toepnmf;

namespace {

HrirSet as_set(const Matrix& x) {
  return HrirSet(x, 44100, std::vector<Direction>(static_cast<std::size_t>(x.cols())));
}

FactorModel trained(const Matrix& x, Index k, int iters) {
  TrainConfig cfg;
  cfg.filter_length = k;
  cfg.iterations = iters;
  cfg.warn_unpreprocessed = false;
  return train(as_set(x), cfg);
}

FactorModel from_truth(const oracle::Synthetic& syn) {
  FactorModel m;
  m.f = syn.f0;
  m.G = syn.g0;
  m.num_taps = syn.x.rows();
  m.num_directions = syn.x.cols();
  m.filter_length = syn.g0.cols();
  m.sample_rate_hz = 44100;
  m.directions.resize(static_cast<std::size_t>(syn.x.cols()));
  return m;
}

double mean_nnze(const FactorModel& m) {
  double total = 0.0;
  for (const auto& r : m.sparsity->rows) total += static_cast<double>(r.nnze());
  return total / static_cast<double>(m.sparsity->rows.size());
}

ResidualTransform window(double sigma) { return {TransformKind::window, sigma}; }

}  // namespace

TEST_CASE("build_transform") {
  CHECK(build_transform({}, 3) == Matrix::Identity(3, 3));
  const Matrix w = build_transform(window(1e9), 8);
  CHECK((w - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-12);
  const Matrix c = build_transform({TransformKind::convolution, 1.0}, 3);
  CHECK(c(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(c(0, 1) == doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(c == c.transpose());
  CHECK(c(0, 1) == c(1, 2));
  const Matrix w30 = build_transform(window(30.0), 5);
  CHECK(w30(4, 4) == doctest::Approx(std::exp(-16.0 / 900.0)));
  CHECK(w30(1, 0) == 0.0);
  CHECK_THROWS_AS(build_transform(window(0.0), 3), DimensionError);
  CHECK_THROWS_AS(build_transform({TransformKind::convolution, -1.0}, 3), DimensionError);
}

TEST_CASE("l1_nnls small cases") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const Vector g = l1_nnls(i2, (Vector(2) << 3, -1).finished(), i2, 0.0);
  CHECK(g(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(g(1) == 0.0);
  const Matrix i1 = Matrix::Identity(1, 1);
  CHECK(l1_nnls(i1, Vector::Constant(1, 3.0), i1, 2.0)(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(l1_nnls(i2, Vector::Constant(2, NAN), i2, 0.0), DataError);
  CHECK_THROWS_AS(l1_nnls(i2, Vector::Zero(3), i2, 0.0), DimensionError);
}

TEST_CASE("l1_nnls matches support enumeration and satisfies KKT") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix f = oracle::random_matrix(12, 6, rng);
    const Vector x = oracle::random_matrix(12, 1, rng);
    for (const Matrix& d : {Matrix(Matrix::Identity(12, 12)), build_transform(window(6.0), 12),
                            build_transform({TransformKind::convolution, 1.5}, 12)}) {
      for (const double lambda : {0.0, 0.1, 1.0}) {
        const L1NnlsSolver solver(f, d);
        const Vector g = solver.solve(x, lambda);
        const Matrix df = d * f;
        const Vector ref = oracle::nnqp_enumerate(df.transpose() * df, df.transpose() * (d * x), lambda);
        const double obj = solver.objective(g, x, lambda);
        const double ref_obj = solver.objective(ref, x, lambda);
        CHECK((g.array() >= 0.0).all());
        CHECK(std::abs(obj - ref_obj) <= 1e-6 * std::max(1.0, std::abs(ref_obj)));
        CHECK(solver.kkt_residual(g, x, lambda) <= 1e-8);
      }
    }
  }
}

TEST_CASE("objective is non-decreasing in lambda and lambda_max zeroes the solution") {
  std::mt19937_64 rng(12);
  const Matrix f = oracle::random_matrix(10, 5, rng);
  const Vector x = oracle::random_matrix(10, 1, rng);
  const L1NnlsSolver solver(f, Matrix::Identity(10, 10));
  double prev = -INFINITY;
  for (const double lambda : {0.0, 0.01, 0.1, 0.5, 1.0, 5.0}) {
    const double obj = solver.objective(solver.solve(x, lambda), x, lambda);
    CHECK(obj >= prev - 1e-12);
    prev = obj;
  }
  const double lmax = solver.lambda_max(x);
  CHECK(solver.solve(x, lmax * 1.0001).isZero(0.0));
}

TEST_CASE("l1_ls_baseline") {
  const Matrix i2 = Matrix::Identity(2, 2);
  const Vector x = (Vector(2) << 3, -1).finished();
  CHECK(l1_ls_baseline(x, i2, 2.0) == Vector((Vector(2) << 2, 0).finished()));
  CHECK(l1_ls_baseline(x, i2, 0.0) == x);

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector y = oracle::random_matrix(40, 1, rng);
    for (const Matrix& d : {build_transform(window(30.0), 40), build_transform({TransformKind::convolution, 2.0}, 40)}) {
      const Vector ours = l1_ls_baseline(y, d, 0.05);
      const Vector ref = oracle::l1_ls_coordinate_descent(y, d, 0.05);
      auto obj = [&](const Vector& v) { return (d * (v - y)).squaredNorm() + 0.05 * v.lpNorm<1>(); };
      CHECK(std::abs(obj(ours) - obj(ref)) <= 1e-6 * std::max(1.0, obj(ref)));
    }
  }
}

TEST_CASE("prune") {
  const auto s = prune((Vector(3) << 0.5, 1e-5, 0.2).finished(), 1e-4);
  CHECK(s.indices == std::vector<Index>{0, 2});
  CHECK(s.values == std::vector<double>{0.5, 0.2});
  CHECK(s.length == 3);
  CHECK(prune(Vector::Constant(4, 1e-6)).nnze() == 0);
  CHECK(prune(Vector::Constant(4, 1e-6)).dense().isZero(0.0));
  CHECK(prune((Vector(3) << 0.0, 1e-30, 2.0).finished(), 0.0).nnze() == 2);
  CHECK((prune((Vector(3) << 0.5, 1e-5, 0.2).finished()).dense() - Vector((Vector(3) << 0.5, 0, 0.2).finished())).isZero(0.0));
}

TEST_CASE("sparsify_model on an exactly factorized model") {
  const auto syn = oracle::make_synthetic(24, 6, 5, 3);
  const auto model = from_truth(syn);
  const auto sparse = sparsify_model(model, as_set(syn.x), 0.0, {}, 0.0);
  CHECK((sparse.G - syn.g0).cwiseAbs().maxCoeff() <= 1e-6);
  REQUIRE(sparse.sparsity.has_value());
  CHECK(sparse.sparsity->rows.size() == 6);

  SUBCASE("sparse rows reconstruct like their dense expansion") {
    for (Index j = 0; j < 6; ++j) {
      const auto& row = sparse.sparsity->rows[static_cast<std::size_t>(j)];
      const Vector dense = row.dense();
      CHECK(dense == Vector(sparse.G.row(j).transpose()));
      CHECK(reconstruct(sparse, j) == oracle::convolve(sparse.f, dense).head(24));
    }
  }

  SUBCASE("lambda above the zero threshold empties every row") {
    double lambda = 0.0;
    const L1NnlsSolver solver(toeplitz_from_params(ToeplitzParams::from_filter(model.f, 5)), Matrix::Identity(24, 24));
    for (Index j = 0; j < 6; ++j) lambda = std::max(lambda, solver.lambda_max(syn.x.col(j)));
    const auto empty = sparsify_model(model, as_set(syn.x), 2.0 * lambda, {});
    CHECK(empty.G.isZero(0.0));
    for (const auto& r : empty.sparsity->rows) CHECK(r.nnze() == 0);
  }
}

TEST_CASE("mean NNZE is non-increasing over a lambda sweep") {
  std::mt19937_64 rng(14);
  Matrix x = oracle::random_matrix(32, 10, rng);
  for (Index i = 0; i < 32; ++i) x.row(i) *= std::exp(-0.1 * static_cast<double>(i));
  const auto model = trained(x, 12, 30);
  double prev = INFINITY;
  for (const double lambda : {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
    const double nnze = mean_nnze(sparsify_model(model, as_set(x), lambda, {}));
    CHECK(nnze <= prev);
    prev = nnze;
  }
}

TEST_CASE("window transform limits and sigma tuning") {
  std::mt19937_64 rng(15);
  Matrix x = oracle::random_matrix(40, 6, rng);
  for (Index i = 0; i < 40; ++i) x.row(i) *= std::exp(-0.15 * static_cast<double>(i));
  const auto set = as_set(x);
  const auto model = trained(x, 10, 30);

  const L1NnlsSolver identity(toeplitz_from_params(ToeplitzParams::from_filter(model.f, 10)), Matrix::Identity(40, 40));
  const L1NnlsSolver wide(toeplitz_from_params(ToeplitzParams::from_filter(model.f, 10)), build_transform(window(1e6), 40));
  for (Index j = 0; j < 6; ++j)
    CHECK((identity.solve(x.col(j), 1e-3) - wide.solve(x.col(j), 1e-3)).cwiseAbs().maxCoeff() <= 1e-9);

  for (Index j = 0; j < 6; ++j) {
    const double sd_identity = resolved_sd(model, set, j, {}, 1e-3);
    const auto huge = tune_sigma(model, set, j, {1e9}, 1e-3);
    CHECK(huge.sd_db == doctest::Approx(sd_identity).epsilon(1e-9));

    const auto grid = default_sigma_grid();
    const auto best = tune_sigma(model, set, j, grid, 1e-3);
    std::vector<double> doubled = grid;
    doubled.insert(doubled.end(), grid.rbegin(), grid.rend());
    const auto again = tune_sigma(model, set, j, doubled, 1e-3);
    CHECK(best.sigma == again.sigma);
    CHECK(best.sd_db == again.sd_db);
    CHECK(std::isfinite(best.sigma));
    for (const double s : grid) CHECK(best.sd_db <= resolved_sd(model, set, j, window(s), 1e-3));
  }
  CHECK(default_sigma_grid().size() == 28);
  CHECK_THROWS_AS(tune_sigma(model, set, 0, {}), DimensionError);
}

TEST_CASE("tuned sigma beats identity on average for early-energy fixtures") {
  for (const std::uint64_t seed : {16u, 17u, 18u}) {
    std::mt19937_64 rng(seed);
    Matrix x = oracle::random_matrix(64, 8, rng);
    for (Index i = 0; i < 64; ++i) x.row(i) *= std::exp(-0.2 * static_cast<double>(i));
    const auto set = as_set(x);
    const auto model = trained(x, 16, 30);
    double tuned = 0.0, identity = 0.0;
    for (Index j = 0; j < 8; ++j) {
      const auto best = tune_sigma(model, set, j, default_sigma_grid(), 1e-3);
      CHECK(std::isfinite(best.sigma));
      tuned += best.sd_db;
      identity += resolved_sd(model, set, j, {}, 1e-3);
    }
    CHECK(tuned <= identity);
  }
}

TEST_CASE("sparse model json round trip keeps empty rows") {
  const auto syn = oracle::make_synthetic(20, 4, 4, 5);
  const auto model = from_truth(syn);
  const auto sparse = sparsify_model(model, as_set(syn.x), 1e6, window(20.0));
  const auto back = model_from_json(model_to_json(sparse));
  REQUIRE(back.sparsity.has_value());
  CHECK(back.sparsity->transform.kind == TransformKind::window);
  CHECK(back.sparsity->transform.sigma == 20.0);
  CHECK(back.sparsity->lambda == 1e6);
  for (Index j = 0; j < 4; ++j) {
    CHECK(back.sparsity->rows[static_cast<std::size_t>(j)].nnze() == 0);
    CHECK(std::isinf(back.sparsity->sd_db[static_cast<std::size_t>(j)]));
  }
  const auto dense = sparsify_model(model, as_set(syn.x), 1e-3, {});
  const auto back2 = model_from_json(model_to_json(dense));
  CHECK(back2.G == dense.G);
  CHECK(back2.sparsity->sd_db == dense.sparsity->sd_db);
}
