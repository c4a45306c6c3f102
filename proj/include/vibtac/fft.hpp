#pragma once

// Mixed-radix decimation-in-time FFT for arbitrary lengths. Each prime factor
// p costs a naive p-point butterfly, which is fine for the smooth lengths used
// here (1100 = 2^2 * 5^2 * 11).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "vibtac/errors.hpp"

namespace vibtac {

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw InvalidArgument("FftPlan: length must be positive");
    std::size_t rest = n;
    for (std::size_t p = 2; p * p <= rest; ++p) {
      while (rest % p == 0) {
        factors_.push_back(p);
        rest /= p;
      }
    }
    if (rest > 1) factors_.push_back(rest);
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
  }

  std::size_t size() const { return n_; }

  // Forward transform: X[k] = sum_n x[n] exp(-2 pi i k n / N).
  std::vector<std::complex<double>> forward(std::span<const std::complex<double>> in) const {
    if (in.size() != n_) throw DimensionMismatch("FftPlan: input length differs from plan");
    std::vector<std::complex<double>> out(n_);
    std::vector<std::complex<double>> scratch(n_);
    recurse(in.data(), out.data(), scratch.data(), n_, 1, 0);
    return out;
  }

  std::vector<std::complex<double>> forward_real(std::span<const double> in) const {
    std::vector<std::complex<double>> z(in.begin(), in.end());
    return forward(z);
  }

 private:
  void recurse(const std::complex<double>* in, std::complex<double>* out,
               std::complex<double>* scratch, std::size_t n, std::size_t stride,
               std::size_t depth) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = factors_[depth];
    const std::size_t m = n / p;
    // sub-transform r lives in out[r*m .. r*m + m)
    for (std::size_t r = 0; r < p; ++r) {
      recurse(in + r * stride, out + r * m, scratch, m, stride * p, depth + 1);
    }
    const std::size_t step = n_ / n;  // W_n^e == W_N^(e*step)
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t q = 0; q < p; ++q) {
        const std::size_t bin = k + q * m;
        std::complex<double> acc = out[k];
        for (std::size_t r = 1; r < p; ++r) {
          const std::size_t e = (r * bin * step) % n_;
          acc += twiddles_[e] * out[r * m + k];
        }
        scratch[bin] = acc;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = scratch[i];
  }

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<std::complex<double>> twiddles_;
};

}  // namespace vibtac
