#include "facing/aoa.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "facing/error.hpp"
#include "facing/fft.hpp"

namespace facing::aoa {
namespace {

constexpr int kGridSize = 360;
constexpr double kBroadside = std::numbers::pi / 2.0;

// Vertex of the parabola through the integer peak and its neighbours.
double refined_peak_lag(const dsp::Correlation& c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.values.size(); ++i)
        if (c.values[i] > c.values[best]) best = i;
    double lag = c.lags[best];
    if (best > 0 && best + 1 < c.values.size()) {
        const double l = c.values[best - 1], m = c.values[best], r = c.values[best + 1];
        const double denom = l - 2.0 * m + r;
        if (denom < 0.0) lag += 0.5 * (l - r) / denom;
    }
    return lag;
}

}  // namespace

dsp::Correlation gcc_phat(const Signal& a, const Signal& b, std::optional<std::size_t> max_lag) {
    if (a.sample_rate != b.sample_rate) throw InvalidInput("gcc_phat: sample-rate mismatch");
    if (energy(a.samples) == 0.0 || energy(b.samples) == 0.0) throw DegenerateInput("gcc_phat: zero-energy input");
    const std::size_t shortest = std::min(a.size(), b.size());
    const std::size_t lag_limit = max_lag.value_or(shortest / 2);
    if (lag_limit >= a.size() + b.size()) throw InvalidInput("gcc_phat: max_lag too large");

    const std::size_t n = fft::good_size(a.size() + b.size());
    auto fa = fft::forward(a.samples, n);
    const auto fb = fft::forward(b.samples, n);
    double peak = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k) {
        fa[k] *= std::conj(fb[k]);
        peak = std::max(peak, std::abs(fa[k]));
    }
    const double floor = 1e-12 * peak;
    for (auto& c : fa) {
        const double mag = std::abs(c);
        c = mag > floor ? c / mag : 0.0;
    }
    const auto circ = fft::inverse(fa, n);

    dsp::Correlation out;
    const int limit = static_cast<int>(lag_limit);
    for (int lag = -limit; lag <= limit; ++lag) {
        out.lags.push_back(lag);
        out.values.push_back(circ[lag >= 0 ? static_cast<std::size_t>(lag) : n - static_cast<std::size_t>(-lag)]);
    }
    return out;
}

std::vector<double> arrival_delays(const DevicePose& device, double angle, int sample_rate) {
    const Vec2 dir = unit(angle);
    std::vector<double> out;
    for (const auto& m : mic_offsets_local(device)) out.push_back(-dot(m, dir) / kSpeedOfSound * sample_rate);
    return out;
}

AoAEstimate estimate_aoa(std::span<const Signal> mics, const DevicePose& device, const Options& options) {
    const int m = device.mic_count;
    if (m < 4 || m % 2 != 0) throw InvalidInput("estimate_aoa: needs an even number of at least 4 microphones");
    if (mics.size() != static_cast<std::size_t>(m)) throw InvalidInput("estimate_aoa: one signal per microphone required");
    const int fs = mics.front().sample_rate;
    const double aperture = 2.0 * device.array_radius / kSpeedOfSound * fs;
    const auto max_lag = static_cast<std::size_t>(std::ceil(aperture)) + dsp::kSincHalfWidth + 2;

    // Expected pair lags per candidate degree: lag = delay(p) - delay(q).
    std::vector<std::vector<double>> delays(kGridSize);
    for (int deg = 0; deg < kGridSize; ++deg) delays[static_cast<std::size_t>(deg)] = arrival_delays(device, deg2rad(deg), fs);

    const int pairs = m / 2;
    std::vector<double> mean(kGridSize, 0.0);
    AoAEstimate est;
    bool all_zero_lag = true;
    for (int p = 0; p < pairs; ++p) {
        const int q = p + pairs;
        const auto curve = gcc_phat(mics[static_cast<std::size_t>(p)], mics[static_cast<std::size_t>(q)], max_lag);
        all_zero_lag = all_zero_lag && std::abs(refined_peak_lag(curve)) < 0.5;
        std::vector<double> sampled(kGridSize);
        for (std::size_t deg = 0; deg < kGridSize; ++deg) {
            const double lag = delays[deg][static_cast<std::size_t>(p)] - delays[deg][static_cast<std::size_t>(q)];
            sampled[deg] = dsp::sinc_interpolate(curve.values, lag - curve.lags.front());
            mean[deg] += sampled[deg] / pairs;
        }
        if (options.keep_curves) est.per_pair_curves.push_back(std::move(sampled));
    }

    // A planar source always offsets some diagonal pair by at least aperture * cos(pi / M).
    if (all_zero_lag && aperture * std::cos(std::numbers::pi / m) >= 1.0) {
        est.angle = kBroadside;
        est.confidence = 0.0;
        est.degenerate = true;
        return est;
    }

    std::size_t best = 0;
    for (std::size_t deg = 1; deg < kGridSize; ++deg)
        if (std::abs(mean[deg]) > std::abs(mean[best])) best = deg;
    est.angle = deg2rad(static_cast<double>(best));
    est.confidence = std::abs(mean[best]);
    return est;
}

AoAEstimate estimate_aoa_from_channels(std::span<const ImpulseResponse> channels, const DevicePose& device,
                                       const Options& options) {
    std::vector<Signal> as_signals;
    as_signals.reserve(channels.size());
    for (const auto& h : channels) as_signals.push_back(as_signal(h));
    return estimate_aoa(as_signals, device, options);
}

}  // namespace facing::aoa
