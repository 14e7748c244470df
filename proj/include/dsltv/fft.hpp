// Unitary DFT helpers backed by FFTW (any transform length).
//
//   forward:  X_k = (1/sqrt(n)) sum_m x_m e^{-i 2π k m / n}
//   inverse:  x_m = (1/sqrt(n)) sum_k X_k e^{+i 2π k m / n}
//
// Plans are created once per (length, direction) with FFTW_ESTIMATE and
// cached for the process lifetime; plan creation is serialized, execution is
// concurrency-safe. The 1/sqrt(n) scaling keeps both directions norm
// preserving, so operator chains built from these are unitary by
// construction.
#pragma once

#include <cstddef>

#include "dsltv/common.hpp"

namespace dsltv::fft {

/** In-place unitary forward DFT of length n. */
void forward(Complex* data, std::size_t n);

/** In-place unitary inverse DFT of length n. */
void inverse(Complex* data, std::size_t n);

inline void forward(CVec& v) { forward(v.data(), static_cast<std::size_t>(v.size())); }
inline void inverse(CVec& v) { inverse(v.data(), static_cast<std::size_t>(v.size())); }

}  // namespace dsltv::fft
