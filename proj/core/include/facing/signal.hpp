#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace facing {

/// Uniformly sampled real waveform.
struct Signal {
    std::vector<double> samples;
    int sample_rate = 16000;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] std::span<const double> view() const noexcept { return samples; }
};

/// Finite tap vector of an air channel. Tap k models a delay of k samples.
struct ImpulseResponse {
    std::vector<double> taps;
    int sample_rate = 16000;

    [[nodiscard]] std::size_t size() const noexcept { return taps.size(); }
};

/// Checks sample_rate > 0 and that all samples are finite. Throws InvalidInput.
void validate(const Signal& s, const char* what = "signal");
void validate(const ImpulseResponse& h, const char* what = "impulse response");

inline Signal as_signal(const ImpulseResponse& h) { return {h.taps, h.sample_rate}; }
inline ImpulseResponse as_channel(const Signal& s) { return {s.samples, s.sample_rate}; }

[[nodiscard]] double energy(std::span<const double> x) noexcept;
[[nodiscard]] double rms(std::span<const double> x) noexcept;

}  // namespace facing
