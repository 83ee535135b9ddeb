#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace facing::fft {

using Spectrum = std::vector<std::complex<double>>;

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
[[nodiscard]] std::size_t good_size(std::size_t n);

/// Real-to-complex transform of x zero-padded (or truncated) to n points. Returns n/2+1 bins.
[[nodiscard]] Spectrum forward(std::span<const double> x, std::size_t n);

/// Inverse of forward(): n real samples, scaled by 1/n.
[[nodiscard]] std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n);

}  // namespace facing::fft
