#pragma once

#include <algorithm>
#include <span>

#include "mmpoint/common.hpp"

namespace mmpoint {

// Exponent sign of the DFT kernel exp(sign * 2*pi*i*k*n/N). Unnormalized in
// both directions.
enum class FftSign { negative = -1, positive = +1 };

// In-place batch of `howmany` length-`n` transforms. Element k of transform
// b lives at data[b * dist + k * stride]. Safe to call concurrently; plans are
// created once per shape and cached.
void fft_many(std::span<cplx> data, int n, int howmany, int stride, int dist, FftSign sign);

inline void fft(std::span<cplx> data, FftSign sign) {
  const int n = static_cast<int>(data.size());
  fft_many(data, n, 1, 1, n, sign);
}

// Swap halves so bin 0 moves to index n/2 (numpy fftshift).
template <typename T>
void fftshift(std::span<T> v) {
  const std::size_t n = v.size();
  std::rotate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n - n / 2), v.end());
}

}  // namespace mmpoint
