#include "toepnmf/toeplitz.hpp"

#include "toepnmf/error.hpp"

#include <algorithm>
#include <string>

namespace toepnmf {

ToeplitzParams::ToeplitzParams(Index rows, Index cols, bool constrained)
    : rows_(rows), cols_(cols), constrained_(constrained) {
  if (rows < 1 || cols < 1) throw DimensionError("ToeplitzParams: dimensions must be positive");
  if (constrained && cols > rows)
    throw DimensionError("ToeplitzParams: constrained form requires K <= M");
  theta_ = Vector::Zero(rows + cols - 1);
}

ToeplitzParams ToeplitzParams::from_filter(const Vector& f, Index cols) {
  if (f.size() < 1) throw DimensionError("from_filter: empty filter");
  ToeplitzParams p(f.size() + cols - 1, cols, true);
  for (Index d = 0; d < f.size(); ++d) p.theta_(p.rows_ - 1 - d) = f(d);
  return p;
}

bool ToeplitzParams::is_free(Index k) const {
  if (k < min_index() || k > max_index()) return false;
  return !constrained_ || (k >= cols_ - rows_ && k <= 0);
}

void ToeplitzParams::set(Index k, double value) {
  if (!is_free(k))
    throw DimensionError("ToeplitzParams: index " + std::to_string(k) + " is not a free parameter");
  theta_(k + rows_ - 1) = value;
}

Vector ToeplitzParams::resonance_filter() const {
  if (!constrained_) throw DimensionError("resonance_filter: parameters are not constrained");
  const Index len = rows_ - cols_ + 1;
  Vector f(len);
  for (Index d = 0; d < len; ++d) f(d) = (*this)[-d];
  return f;
}

Index diagonal_length(Index rows, Index cols, Index k) {
  return std::min({k + rows, cols - k, cols, rows});
}

double diagonal_sum(const Matrix& f, Index k) {
  double s = 0.0;
  const Index i0 = std::max<Index>(0, -k);
  const Index i1 = std::min<Index>(f.rows(), f.cols() - k);
  for (Index i = i0; i < i1; ++i) s += f(i, i + k);
  return s;
}

Matrix toeplitz_from_params(const ToeplitzParams& p) {
  Matrix out(p.rows(), p.cols());
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i) out(i, j) = p[j - i];
  return out;
}

ToeplitzParams nearest_toeplitz(const Matrix& f) {
  if (!f.allFinite()) throw DataError("nearest_toeplitz: non-finite input");
  ToeplitzParams p(f.rows(), f.cols());
  for (Index k = p.min_index(); k <= p.max_index(); ++k)
    p.set(k, diagonal_sum(f, k) / static_cast<double>(diagonal_length(f.rows(), f.cols(), k)));
  return p;
}

Vector constrained_product(const ToeplitzParams& p, const Vector& g) {
  if (!p.constrained()) throw DimensionError("constrained_product: parameters are not constrained");
  if (g.size() != p.cols())
    throw DimensionError("constrained_product: g has length " + std::to_string(g.size()) +
                         ", expected " + std::to_string(p.cols()));
  const Vector f = p.resonance_filter();
  Vector out = Vector::Zero(p.rows());
  for (Index j = 0; j < g.size(); ++j)
    for (Index d = 0; d < f.size(); ++d) out(j + d) += f(d) * g(j);
  return out;
}

Vector convolve_full(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) return Vector();
  Vector out = Vector::Zero(a.size() + b.size() - 1);
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j) out(i + j) += a(i) * b(j);
  return out;
}

}  // namespace toepnmf
