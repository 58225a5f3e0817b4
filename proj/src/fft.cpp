#include "asc/fft.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace asc {

Fft::Fft(int n) : n_(n) {
  if (n < 2 || !is_power_of_two(n))
    throw ArgumentError("fft: size must be a power of two >= 2, got " + std::to_string(n));

  int bits = 0;
  while ((1 << bits) < n) ++bits;

  bit_reverse_.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b) r = (r << 1) | ((i >> b) & 1);
    bit_reverse_[i] = r;
  }

  twiddles_.resize(n / 2);
  const double step = -2.0 * 3.14159265358979323846 / n;
  for (int k = 0; k < n / 2; ++k)
    twiddles_[k] = std::complex<double>(std::cos(step * k), std::sin(step * k));
}

void Fft::transform(std::vector<std::complex<double>>& buf) const {
  if (static_cast<int>(buf.size()) != n_)
    throw ArgumentError("fft: buffer size " + std::to_string(buf.size()) +
                        " does not match transform size " + std::to_string(n_));

  for (int i = 0; i < n_; ++i) {
    const int j = bit_reverse_[i];
    if (i < j) std::swap(buf[i], buf[j]);
  }

  for (int len = 2; len <= n_; len <<= 1) {
    const int half = len / 2;
    const int stride = n_ / len;
    for (int start = 0; start < n_; start += len) {
      for (int k = 0; k < half; ++k) {
        const std::complex<double> w = twiddles_[static_cast<size_t>(k) * stride];
        const std::complex<double> odd = w * buf[start + half + k];
        const std::complex<double> even = buf[start + k];
        buf[start + k] = even + odd;
        buf[start + half + k] = even - odd;
      }
    }
  }
}

}  // namespace asc
