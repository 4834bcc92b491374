#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace toepnmf {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n);
bool is_pow2(std::size_t n);

// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
// Power-of-two sizes only. inverse() includes the 1/n scale.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  void forward(std::span<Complex> data) const;
  void inverse(std::span<Complex> data) const;

 private:
  void transform(std::span<Complex> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<Complex> twiddle_;  // exp(-2*pi*i*k/n), k < n/2
};

// Discrete Fourier transform of a real sequence of any length
// (Bluestein chirp-z for non power-of-two sizes).
std::vector<Complex> dft(std::span<const double> x);

}  // namespace toepnmf
