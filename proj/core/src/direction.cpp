#include "facing/direction.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "facing/error.hpp"
#include "facing/fft.hpp"
#include "facing/simulate.hpp"

namespace facing::direction {
namespace {

using fft::Spectrum;

// Regularized division of a cached spectrum by another, returned as an nfft-point circular response.
std::vector<double> divide(const Spectrum& num, const Spectrum& den, std::size_t nfft, double reg) {
    double peak = 0.0;
    for (const auto& c : den) peak = std::max(peak, std::norm(c));
    if (peak == 0.0) throw DegenerateInput("estimate_channels: reference spectrum is all zeros");
    const double floor = reg * peak;
    Spectrum q(num.size());
    for (std::size_t k = 0; k < num.size(); ++k) q[k] = num[k] * std::conj(den[k]) / (std::norm(den[k]) + floor);
    return fft::inverse(q, nfft);
}

long signed_lag(std::size_t index, std::size_t nfft) {
    return index <= nfft / 2 ? static_cast<long>(index) : static_cast<long>(index) - static_cast<long>(nfft);
}

// Lag of the largest positive tap over the whole circular response.
long positive_peak_lag(const std::vector<double>& circ) {
    const auto it = std::max_element(circ.begin(), circ.end());
    return signed_lag(static_cast<std::size_t>(it - circ.begin()), circ.size());
}

double tap_at(const std::vector<double>& circ, long lag) {
    const long n = static_cast<long>(circ.size());
    return circ[static_cast<std::size_t>(((lag % n) + n) % n)];
}

void normalize(std::vector<double>& x) {
    const double r = rms(x);
    if (r > 0.0)
        for (auto& v : x) v /= r;
}

double relative_change(const std::vector<double>& next, const std::vector<double>& prev) {
    double diff = 0.0, base = 0.0;
    for (std::size_t t = 0; t < prev.size(); ++t) {
        diff += (next[t] - prev[t]) * (next[t] - prev[t]);
        base += prev[t] * prev[t];
    }
    return base > 0.0 ? std::sqrt(diff / base) : std::numeric_limits<double>::infinity();
}

// Correlation-aligned sum like dsp::align_correlate, with each lag refined to 1/64 sample on the
// band-limited correlation so near-equal arrivals do not sum into a comb.
std::vector<double> initial_source(std::span<const Signal> xs) {
    const auto& ref = xs.front();
    std::vector<double> sum = ref.samples;
    for (std::size_t j = 1; j < xs.size(); ++j) {
        const auto corr = dsp::cross_correlate(ref, xs[j]);
        const int lag = corr.argmax_lag();
        const double centre = static_cast<double>(lag - corr.lags.front());
        double best = centre, best_value = corr.at(lag);
        for (int step = -64; step <= 64; ++step) {
            const double pos = centre + step / 64.0;
            const double v = dsp::sinc_interpolate(corr.values, pos);
            if (v > best_value) {
                best_value = v;
                best = pos;
            }
        }
        const auto aligned = dsp::fractional_shift(xs[j].samples, best + corr.lags.front());
        for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += aligned[t];
    }
    return sum;
}

}  // namespace

const IterationRecord& IterationTrace::result() const {
    if (iterations.empty()) throw InvalidInput("IterationTrace: no iterations recorded");
    return diverged ? iterations.at(best_iteration) : iterations.back();
}

IterationTrace estimate_channels(std::span<const Signal> per_device, const ChannelOptions& options) {
    if (per_device.size() < 2) throw InvalidInput("estimate_channels: needs signals from at least two devices");
    if (options.max_iterations < 1) throw InvalidInput("estimate_channels: max_iterations must be positive");
    const int fs = per_device.front().sample_rate;
    const std::size_t len = per_device.front().size();
    for (const auto& x : per_device) {
        if (x.sample_rate != fs) throw InvalidInput("estimate_channels: sample-rate mismatch");
        if (x.size() != len) throw InvalidInput("estimate_channels: device signals differ in length");
    }
    const std::size_t channel_len = options.channel_len > 0 ? options.channel_len : dsp::default_channel_len(fs);
    if (channel_len >= len) throw InvalidInput("estimate_channels: channel length exceeds the signal length");
    const long guard = std::lround(options.guard_seconds * fs);
    const std::size_t nfft = fft::good_size(len + channel_len);

    std::vector<Spectrum> device_spectra;
    for (const auto& x : per_device) device_spectra.push_back(fft::forward(x.samples, nfft));

    auto source = initial_source(per_device);
    normalize(source);

    IterationTrace trace;
    int growth = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < options.max_iterations; ++it) {
        const auto source_spectrum = fft::forward(source, nfft);
        std::vector<std::vector<double>> circ;
        for (const auto& spec : device_spectra) circ.push_back(divide(spec, source_spectrum, nfft, options.reg));

        // Channels are read circularly from an offset that puts the earliest strongest tap at the guard lag.
        std::vector<long> peaks;
        for (const auto& h : circ) peaks.push_back(positive_peak_lag(h));
        const long drift = *std::min_element(peaks.begin(), peaks.end()) - guard;
        for (auto& p : peaks) p -= drift;

        IterationRecord rec;
        rec.source = {dsp::integer_shift(source, drift), fs};
        ImpulseResponse global{std::vector<double>(channel_len, 0.0), fs};
        for (std::size_t i = 0; i < circ.size(); ++i) {
            ImpulseResponse h{std::vector<double>(channel_len), fs};
            for (std::size_t k = 0; k < channel_len; ++k) h.taps[k] = tap_at(circ[i], static_cast<long>(k) + drift);
            // Positive part, peak-aligned at the guard lag, summed across devices.
            for (std::size_t k = 0; k < channel_len; ++k) {
                const long dst = static_cast<long>(k) - (peaks[i] - guard);
                if (dst >= 0 && dst < static_cast<long>(channel_len))
                    global.taps[static_cast<std::size_t>(dst)] += std::max(0.0, h.taps[k]);
            }
            rec.device_channels.push_back(std::move(h));
        }

        // Refine the source against the global channel; its peak sits at the guard lag, so undo that delay.
        const auto refined = divide(fft::forward(source, nfft), fft::forward(global.taps, nfft), nfft, options.reg);
        std::vector<double> next(len);
        for (std::size_t t = 0; t < len; ++t) next[t] = tap_at(refined, static_cast<long>(t) - guard);
        normalize(next);

        rec.residual = relative_change(next, source);
        rec.global_channel = std::move(global);
        trace.iterations.push_back(std::move(rec));
        trace.iterations_used = it + 1;
        source = std::move(next);

        const double residual = trace.iterations.back().residual;
        if (residual < best_residual) {
            best_residual = residual;
            trace.best_iteration = static_cast<std::size_t>(it);
        }
        const bool grew = it > 0 && residual >= options.threshold &&
                          residual > trace.iterations[static_cast<std::size_t>(it) - 1].residual;
        growth = grew ? growth + 1 : 0;
        if (options.stop_at_threshold && residual < options.threshold) {
            trace.converged = true;
            break;
        }
        if (growth >= 3) {
            trace.diverged = true;
            break;
        }
    }
    if (!trace.diverged && !trace.converged) trace.converged = trace.iterations.back().residual < options.threshold;
    return trace;
}

LosPowers extract_los_power(std::span<const ImpulseResponse> channels, const LosOptions& options) {
    if (!(options.peak_fraction > 0.0 && options.peak_fraction <= 1.0))
        throw InvalidInput("extract_los_power: peak fraction must lie in (0, 1]");
    LosPowers out;
    for (const auto& ch : channels) {
        const auto& h = ch.taps;
        if (h.empty()) throw InvalidInput("extract_los_power: empty channel");
        const auto peak_it = std::max_element(h.begin(), h.end());
        if (*peak_it <= 0.0) {
            out.powers.push_back(0.0);
            out.nonpositive.push_back(true);
            continue;
        }
        const auto peak = static_cast<std::size_t>(peak_it - h.begin());
        const auto window = static_cast<std::size_t>(std::lround(options.window_seconds * ch.sample_rate));
        const std::size_t begin = peak > window ? peak - window : 0;
        double amplitude = *peak_it;
        if (options.interpolate_peak) {
            // Scan the band-limited reconstruction so fractional-delay ringing is not mistaken for a peak.
            constexpr int kOversample = 8;
            const double step = 1.0 / kOversample;
            const double end = static_cast<double>(peak) + 1.0;
            std::vector<double> fine;
            for (double pos = static_cast<double>(begin); pos <= end + 1e-9; pos += step)
                fine.push_back(dsp::sinc_interpolate(h, pos));
            const double top = *std::max_element(fine.begin(), fine.end());
            const double threshold = options.peak_fraction * top;
            amplitude = top;
            for (std::size_t k = 1; k + 1 < fine.size(); ++k) {
                if (fine[k] > threshold && fine[k] >= fine[k - 1] && fine[k] >= fine[k + 1]) {
                    amplitude = fine[k];
                    break;
                }
            }
        } else {
            const double threshold = options.peak_fraction * *peak_it;
            for (std::size_t k = begin; k < peak; ++k) {
                const bool rising = k == 0 || h[k] >= h[k - 1];
                if (h[k] > threshold && rising && h[k] >= h[k + 1]) {
                    amplitude = h[k];
                    break;
                }
            }
        }
        out.powers.push_back(amplitude * amplitude);
        out.nonpositive.push_back(false);
    }
    return out;
}

LosPowers extract_los_power(const IterationTrace& trace, const LosOptions& options) {
    return extract_los_power(trace.result().device_channels, options);
}

std::vector<double> equalize(std::span<const double> powers, std::span<const double> distances) {
    if (powers.size() != distances.size()) throw InvalidInput("equalize: powers and distances differ in length");
    std::vector<double> out;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        if (!(distances[i] > 0.0)) throw InvalidInput("equalize: distances must be positive");
        out.push_back(powers[i] * distances[i] * distances[i]);
    }
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw InvalidInput("pearson: length mismatch");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

FacingDecision match_pattern(std::span<const double> equalized, std::span<const Vec2> positions, Vec2 user,
                             const RadiationPattern& pattern, const MatchOptions& options) {
    const std::size_t n = equalized.size();
    if (n == 0 || positions.size() != n) throw InvalidInput("match_pattern: need one power per device");
    FacingDecision out;
    out.user_location = user;
    out.equalized_powers.assign(equalized.begin(), equalized.end());
    if (n == 1) {
        out.correlations = {1.0};
        return out;
    }
    std::vector<double> bearings;
    for (const auto& p : positions) {
        if (distance(p, user) == 0.0) throw InvalidInput("match_pattern: user coincides with a device");
        bearings.push_back(bearing(user, p));
    }
    std::vector<double> expected(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i)
            expected[i] = std::pow(pattern_gain(pattern, bearings[i] - bearings[k]), options.gain_exponent);
        out.correlations.push_back(pearson(equalized, expected));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dc = out.correlations[k] - out.correlations[best];
        if (dc > 1e-12 || (std::abs(dc) <= 1e-12 && equalized[k] > equalized[best])) best = k;
    }
    out.device_index = best;
    return out;
}

locate::DeviceLayout layout_of(std::span<const DevicePose> devices) {
    locate::DeviceLayout layout;
    for (const auto& d : devices) {
        layout.positions.push_back(d.position);
        layout.orientations.push_back(d.orientation);
    }
    layout.gauge = "known device poses";
    return layout;
}

Signal steer(std::span<const Signal> mics, const DevicePose& device, double angle) {
    if (mics.empty()) throw InvalidInput("steer: no microphone signals");
    auto delays = aoa::arrival_delays(device, angle, mics.front().sample_rate);
    for (auto& d : delays) d = -d;
    return dsp::delay_sum_aoa(mics, delays);
}

FacingDecision infer(const std::vector<std::vector<Signal>>& observations, std::span<const DevicePose> devices,
                     const RadiationPattern& pattern, const InferParams& params) {
    const std::size_t n = devices.size();
    if (n < 2) throw InvalidInput("infer: needs at least two devices");
    if (observations.size() != n) throw InvalidInput("infer: one observation set per device required");

    std::vector<aoa::AoAEstimate> aoas;
    for (std::size_t i = 0; i < n; ++i) aoas.push_back(aoa::estimate_aoa(observations[i], devices[i]));
    const auto layout = layout_of(devices);
    const auto user = locate::triangulate(layout, aoas, params.triangulation);

    std::vector<Signal> combined;
    for (std::size_t i = 0; i < n; ++i) combined.push_back(steer(observations[i], devices[i], aoas[i].angle));
    auto trace = estimate_channels(combined, params.channels);
    const auto los = extract_los_power(trace, params.los);

    std::vector<double> distances;
    for (const auto& d : devices) distances.push_back(std::max(distance(d.position, user.position), sim::kMinDistance));
    const auto equalized = equalize(los.powers, distances);

    auto decision = match_pattern(equalized, layout.positions, user.position, pattern, params.match);
    decision.cluster_size = user.cluster_size;
    for (const auto& a : aoas) decision.aoas.push_back(a.angle);
    decision.distances = std::move(distances);
    decision.los_powers = los.powers;
    if (!params.keep_trace) {
        // Keep the decisive iteration's channels and the residual history only.
        for (auto& rec : trace.iterations) {
            rec.source.samples.clear();
            rec.global_channel.taps.clear();
        }
        const std::size_t keep = trace.diverged ? trace.best_iteration : trace.iterations.size() - 1;
        for (std::size_t k = 0; k < trace.iterations.size(); ++k)
            if (k != keep) trace.iterations[k].device_channels.clear();
    }
    decision.trace = std::move(trace);
    return decision;
}

}  // namespace facing::direction
