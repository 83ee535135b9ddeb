#pragma once

#include <optional>
#include <span>
#include <vector>

#include "facing/dsp.hpp"
#include "facing/scene.hpp"
#include "facing/signal.hpp"

namespace facing::aoa {

struct AoAEstimate {
    double angle = 0.0;       // rad, device frame, whole degrees in [0, 2pi)
    double confidence = 0.0;  // |averaged GCC-PHAT| at the chosen angle
    bool degenerate = false;  // every pair peaked at zero lag; angle is the broadside convention
    std::vector<std::vector<double>> per_pair_curves;  // [pair][degree], filled on request
};

struct Options {
    bool keep_curves = false;
};

/// Phase-transform weighted cross-correlation with the cross_correlate lag convention.
/// Peak magnitude is at most 1. Throws DegenerateInput for zero-energy input.
[[nodiscard]] dsp::Correlation gcc_phat(const Signal& a, const Signal& b,
                                        std::optional<std::size_t> max_lag = std::nullopt);

/// Far-field arrival delay (samples) at each mic relative to the array centre for a source at
/// device-frame angle `angle`. Negative values arrive before the centre.
[[nodiscard]] std::vector<double> arrival_delays(const DevicePose& device, double angle, int sample_rate);

/// GCC-PHAT over the M/2 diametrically opposite mic pairs, sampled on a 1 degree grid and averaged.
/// Requires even M >= 4.
[[nodiscard]] AoAEstimate estimate_aoa(std::span<const Signal> mics, const DevicePose& device,
                                       const Options& options = {});

/// Same pipeline on per-mic channel estimates (e.g. deconvolved against a known chirp).
[[nodiscard]] AoAEstimate estimate_aoa_from_channels(std::span<const ImpulseResponse> channels,
                                                     const DevicePose& device, const Options& options = {});

}  // namespace facing::aoa
