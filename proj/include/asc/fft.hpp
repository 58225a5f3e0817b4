#pragma once

#include <complex>
#include <vector>

#include "asc/error.hpp"

namespace asc {

constexpr bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey FFT with precomputed bit-reversal and
// twiddle tables. Forward transform only; sizes are powers of two >= 2.
class Fft {
 public:
  explicit Fft(int n);

  int size() const { return n_; }

  // In-place forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
  void transform(std::vector<std::complex<double>>& buf) const;

 private:
  int n_;
  std::vector<int> bit_reverse_;
  std::vector<std::complex<double>> twiddles_;  // exp(-2*pi*i*k/N), k < N/2
};

}  // namespace asc
