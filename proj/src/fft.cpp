#include "toepnmf/fft.hpp"

#include "toepnmf/error.hpp"

#include <cmath>
#include <numbers>

namespace toepnmf {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_pow2(n)) throw DimensionError("Fft: size must be a power of two");
  bitrev_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle_[k] = Complex(std::cos(a), std::sin(a));
  }
}

void Fft::forward(std::span<Complex> data) const { transform(data, false); }

void Fft::inverse(std::span<Complex> data) const {
  transform(data, true);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= scale;
}

void Fft::transform(std::span<Complex> data, bool inverse) const {
  if (data.size() != n_) throw DimensionError("Fft: buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex w = twiddle_[k * stride];
        const double wr = w.real(), wi = inverse ? -w.imag() : w.imag();
        const Complex u = data[start + k];
        const Complex v = data[start + k + half];
        const Complex t(wr * v.real() - wi * v.imag(), wr * v.imag() + wi * v.real());
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }
}

std::vector<Complex> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (is_pow2(n)) {
    std::vector<Complex> buf(x.begin(), x.end());
    Fft(n).forward(buf);
    return buf;
  }
  // Bluestein: X_k = conj(w_k) * sum_j (x_j conj(w_j)) w_{k-j}, w_m = exp(i*pi*m^2/n).
  std::vector<Complex> chirp(n);
  for (std::size_t m = 0; m < n; ++m) {
    // m^2 mod 2n keeps the angle argument small for large n.
    const auto m2 = static_cast<double>((m * m) % (2 * n));
    const double a = std::numbers::pi * m2 / static_cast<double>(n);
    chirp[m] = Complex(std::cos(a), std::sin(a));
  }
  const std::size_t len = next_pow2(2 * n - 1);
  const Fft plan(len);
  std::vector<Complex> a(len), b(len);
  for (std::size_t m = 0; m < n; ++m) a[m] = x[m] * std::conj(chirp[m]);
  b[0] = chirp[0];
  for (std::size_t m = 1; m < n; ++m) b[m] = b[len - m] = chirp[m];
  plan.forward(a);
  plan.forward(b);
  for (std::size_t i = 0; i < len; ++i) a[i] *= b[i];
  plan.inverse(a);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * std::conj(chirp[k]);
  return out;
}

}  // namespace toepnmf
