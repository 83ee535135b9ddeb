#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "facing/signal.hpp"

namespace facing::dsp {

inline constexpr double kDefaultDeconvReg = 1e-3;
inline constexpr double kDefaultChannelSeconds = 0.1;
/// Half-width of the windowed-sinc interpolation kernel; the kernel has 2*15+1 = 31 taps.
inline constexpr int kSincHalfWidth = 15;

[[nodiscard]] std::size_t default_channel_len(int sample_rate);

/// Linear convolution via FFT. Output length is len(v)+len(h)-1.
[[nodiscard]] Signal convolve(const Signal& v, const ImpulseResponse& h);
[[nodiscard]] std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

/// Circular regularized spectral division over an nfft-point grid:
/// IFFT( X conj(V) / (|V|^2 + reg * max|V|^2) ). Negative lags wrap to the end.
[[nodiscard]] std::vector<double> circular_deconvolve(std::span<const double> x,
                                                      std::span<const double> v,
                                                      std::size_t nfft, double reg);

/// Estimates h with x ~= v * h. Returns channel_len taps starting at lag 0.
/// Throws DegenerateInput when v is all zeros.
[[nodiscard]] ImpulseResponse deconvolve(const Signal& x, const Signal& v, std::size_t channel_len,
                                         double reg = kDefaultDeconvReg);

/// Correlation values[i] = sum_t a(t) * b(t - lags[i]), lags = -max_lag..max_lag.
struct Correlation {
    std::vector<int> lags;
    std::vector<double> values;

    /// Lag of the largest value; ties go to the smallest |lag|, then the negative one.
    [[nodiscard]] int argmax_lag() const;
    [[nodiscard]] double at(int lag) const { return values.at(static_cast<std::size_t>(lag - lags.front())); }
};

/// max_lag defaults to min(len(a), len(b)) / 2 and must stay below min(len(a), len(b)).
[[nodiscard]] Correlation cross_correlate(const Signal& a, const Signal& b,
                                          std::optional<std::size_t> max_lag = std::nullopt);

/// Hann-windowed sinc evaluated at offset u (samples); zero for |u| >= kSincHalfWidth + 1.
[[nodiscard]] double sinc_kernel(double u);

/// Band-limited value of x at fractional index `position` (Hann-windowed sinc, 31 taps).
[[nodiscard]] double sinc_interpolate(std::span<const double> x, double position);

/// y(t) = x(t - delay) with fractional delay in samples; output has the input's length.
[[nodiscard]] std::vector<double> fractional_shift(std::span<const double> x, double delay);

/// y(t) = x(t - delay) for integer delays, zero filled; output has the input's length.
[[nodiscard]] std::vector<double> integer_shift(std::span<const double> x, long delay);

/// Local delay-and-sum: shifts mic j by delays[j] samples and sums.
[[nodiscard]] Signal delay_sum_aoa(std::span<const Signal> mics, std::span<const double> delays);

struct Alignment {
    Signal sum;
    /// lags[j] = argmax_d Corr(X_0(t), X_j(t - d)); lags[0] == 0.
    std::vector<int> lags;
};

/// Global align-on-correlation: sum_j X_j(t - lag_j), in signals[0]'s time base.
[[nodiscard]] Alignment align_correlate_detailed(std::span<const Signal> signals,
                                                 std::optional<std::size_t> max_lag = std::nullopt);
[[nodiscard]] Signal align_correlate(std::span<const Signal> signals);

}  // namespace facing::dsp
