#include "toepnmf/kernels.hpp"

#include "toepnmf/error.hpp"
#include "toepnmf/parallel.hpp"
#include "toepnmf/toeplitz.hpp"

#include <algorithm>
#include <cmath>

namespace toepnmf::kernels {

namespace {

Matrix positive_part(const Matrix& q) { return (q.cwiseAbs() + q) * 0.5; }
Matrix negative_part(const Matrix& q) { return (q.cwiseAbs() - q) * 0.5; }

void check_update_dims(const Matrix& x, const Matrix& f, const Matrix& g) {
  if (f.rows() != x.rows() || g.rows() != x.cols() || g.cols() != f.cols())
    throw DimensionError("update_g: expected X (M x N), F (M x K), G (N x K)");
}

// Input zero-padded by len-1 on both sides so each output sample reads a
// full window.
std::vector<double> pad_signal(std::span<const double> y, std::size_t len) {
  std::vector<double> padded(y.size() + 2 * (len - 1), 0.0);
  std::copy(y.begin(), y.end(), padded.begin() + static_cast<std::ptrdiff_t>(len - 1));
  return padded;
}

constexpr std::size_t kChunk = 4096;

void check_sparse(std::span<const Index> indices, std::span<const double> values, Index length) {
  if (indices.size() != values.size()) throw DimensionError("sparse_direct: indices/values mismatch");
  if (length < 1) throw DimensionError("sparse_direct: filter length must be positive");
  for (Index k : indices)
    if (k < 0 || k >= length) throw DimensionError("sparse_direct: index out of range");
}

// out[i] += v * padded[i + len - 1 - k] for i in [lo, hi).
void accumulate_tap(double* out, const double* padded, std::size_t len, Index k, double v,
                    std::size_t lo, std::size_t hi) {
  const double* src = padded + (len - 1 - static_cast<std::size_t>(k));
  for (std::size_t i = lo; i < hi; ++i) out[i] += v * src[i];
}

void overlap_save_block(const OverlapSavePlan& plan, const std::vector<double>& padded,
                        std::size_t block_index, std::vector<Complex>& scratch, double* out,
                        std::size_t out_len) {
  const std::size_t n = plan.block();
  const std::size_t start = block_index * plan.hop();
  scratch.assign(n, Complex{});
  const std::size_t avail = std::min(n, padded.size() - std::min(padded.size(), start));
  for (std::size_t i = 0; i < avail; ++i) scratch[i] = padded[start + i];
  plan.fft().forward(scratch);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex a = scratch[i], b = plan.spectrum()[i];
    scratch[i] = Complex(a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real());
  }
  plan.fft().inverse(scratch);
  const std::size_t skip = plan.taps() - 1;
  for (std::size_t i = 0; i < plan.hop() && start + i < out_len; ++i) out[start + i] = scratch[skip + i].real();
}

std::vector<double> prepare_overlap_save(const OverlapSavePlan& plan, std::span<const double> y,
                                         std::size_t& out_len, std::size_t& blocks) {
  if (y.empty()) throw DimensionError("overlap_save: empty signal");
  out_len = y.size() + plan.taps() - 1;
  blocks = (out_len + plan.hop() - 1) / plan.hop();
  // taps-1 leading zeros; the tail is implicitly zero.
  std::vector<double> padded(plan.taps() - 1 + y.size(), 0.0);
  std::copy(y.begin(), y.end(), padded.begin() + static_cast<std::ptrdiff_t>(plan.taps() - 1));
  return padded;
}

}  // namespace

Matrix update_g(const Matrix& x, const Matrix& f, const Matrix& g, double eps) {
  check_update_dims(x, f, g);
  const Matrix ftf = f.transpose() * f;
  const Matrix ftf_pos = positive_part(ftf);
  const Matrix ftf_neg = negative_part(ftf);
  const Index k_dim = g.cols();
  Matrix out(g.rows(), k_dim);
  parallel_for(g.rows(), [&](Index n) {
    const Eigen::RowVectorXd xtf = x.col(n).transpose() * f;
    const Eigen::RowVectorXd gneg = g.row(n) * ftf_neg;
    const Eigen::RowVectorXd gpos = g.row(n) * ftf_pos;
    for (Index k = 0; k < k_dim; ++k) {
      const double num = 0.5 * (std::abs(xtf(k)) + xtf(k)) + gneg(k);
      const double den = 0.5 * (std::abs(xtf(k)) - xtf(k)) + gpos(k) + eps;
      out(n, k) = g(n, k) * std::sqrt(num / den);
    }
  });
  return out;
}

Matrix reconstruct(const Vector& f, const Matrix& g, Index taps) {
  Matrix out = Matrix::Zero(taps, g.rows());
  parallel_for(g.rows(), [&](Index n) {
    for (Index j = 0; j < g.cols(); ++j) {
      const double w = g(n, j);
      if (w == 0.0) continue;
      const Index len = std::min<Index>(f.size(), taps - j);
      for (Index d = 0; d < len; ++d) out(j + d, n) += f(d) * w;
    }
  });
  return out;
}

std::vector<double> sparse_direct(std::span<const double> y, std::span<const Index> indices,
                                  std::span<const double> values, Index length, std::uint64_t* macs) {
  if (y.empty()) throw DimensionError("sparse_direct: empty signal");
  check_sparse(indices, values, length);
  const auto len = static_cast<std::size_t>(length);
  const auto padded = pad_signal(y, len);
  const std::size_t out_len = y.size() + len - 1;
  std::vector<double> out(out_len, 0.0);
  const auto chunks = static_cast<Index>((out_len + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](Index c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(out_len, lo + kChunk);
    for (std::size_t t = 0; t < indices.size(); ++t)
      accumulate_tap(out.data(), padded.data(), len, indices[t], values[t], lo, hi);
  });
  if (macs) *macs += static_cast<std::uint64_t>(indices.size()) * out_len;
  return out;
}

std::vector<double> dense_direct(std::span<const double> y, std::span<const double> taps) {
  if (y.empty()) throw DimensionError("dense_direct: empty signal");
  if (taps.empty()) throw DimensionError("dense_direct: empty filter");
  const std::size_t len = taps.size();
  const auto padded = pad_signal(y, len);
  const std::size_t out_len = y.size() + len - 1;
  std::vector<double> out(out_len, 0.0);
  const auto chunks = static_cast<Index>((out_len + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](Index c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(out_len, lo + kChunk);
    for (std::size_t k = 0; k < len; ++k)
      accumulate_tap(out.data(), padded.data(), len, static_cast<Index>(k), taps[k], lo, hi);
  });
  return out;
}

OverlapSavePlan::OverlapSavePlan(std::span<const double> taps, std::size_t block)
    : block_(block), taps_(taps.size()), fft_(block) {
  if (taps.empty()) throw DimensionError("OverlapSavePlan: empty filter");
  if (block < taps.size()) throw DimensionError("OverlapSavePlan: block shorter than filter");
  spectrum_.assign(block, Complex{});
  std::copy(taps.begin(), taps.end(), spectrum_.begin());
  fft_.forward(spectrum_);
}

std::vector<double> overlap_save(const OverlapSavePlan& plan, std::span<const double> y) {
  std::size_t out_len = 0, blocks = 0;
  const auto padded = prepare_overlap_save(plan, y, out_len, blocks);
  std::vector<double> out(out_len, 0.0);
#pragma omp parallel num_threads(max_threads())
  {
    std::vector<Complex> scratch(plan.block());
#pragma omp for schedule(static)
    for (Index b = 0; b < static_cast<Index>(blocks); ++b)
      overlap_save_block(plan, padded, static_cast<std::size_t>(b), scratch, out.data(), out_len);
  }
  return out;
}

namespace serial {

Matrix update_g(const Matrix& x, const Matrix& f, const Matrix& g, double eps) {
  check_update_dims(x, f, g);
  const Matrix xtf = x.transpose() * f;
  const Matrix ftf = f.transpose() * f;
  const Matrix num = positive_part(xtf) + g * negative_part(ftf);
  const Matrix den = (negative_part(xtf) + g * positive_part(ftf)).array() + eps;
  return g.array() * (num.array() / den.array()).sqrt();
}

Matrix reconstruct(const Vector& f, const Matrix& g, Index taps) {
  const Index k = g.cols();
  if (f.size() + k - 1 == taps) return toeplitz_from_params(ToeplitzParams::from_filter(f, k)) * g.transpose();
  Matrix out = Matrix::Zero(taps, g.rows());
  for (Index n = 0; n < g.rows(); ++n) {
    const Vector full = convolve_full(f, g.row(n).transpose());
    const Index len = std::min<Index>(taps, full.size());
    out.col(n).head(len) = full.head(len);
  }
  return out;
}

std::vector<double> sparse_direct(std::span<const double> y, std::span<const Index> indices,
                                  std::span<const double> values, Index length, std::uint64_t* macs) {
  if (y.empty()) throw DimensionError("sparse_direct: empty signal");
  check_sparse(indices, values, length);
  const auto len = static_cast<std::size_t>(length);
  const auto padded = pad_signal(y, len);
  const std::size_t out_len = y.size() + len - 1;
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < indices.size(); ++t)
      acc += values[t] * padded[i + len - 1 - static_cast<std::size_t>(indices[t])];
    out[i] = acc;
  }
  if (macs) *macs += static_cast<std::uint64_t>(indices.size()) * out_len;
  return out;
}

std::vector<double> dense_direct(std::span<const double> y, std::span<const double> taps) {
  if (y.empty()) throw DimensionError("dense_direct: empty signal");
  if (taps.empty()) throw DimensionError("dense_direct: empty filter");
  std::vector<double> out(y.size() + taps.size() - 1, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t k = 0; k < taps.size(); ++k) out[i + k] += y[i] * taps[k];
  return out;
}

std::vector<double> overlap_save(const OverlapSavePlan& plan, std::span<const double> y,
                                 std::vector<Complex>& scratch) {
  std::size_t out_len = 0, blocks = 0;
  const auto padded = prepare_overlap_save(plan, y, out_len, blocks);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) overlap_save_block(plan, padded, b, scratch, out.data(), out_len);
  return out;
}

}  // namespace serial
}  // namespace toepnmf::kernels
