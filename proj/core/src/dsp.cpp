#include "facing/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "facing/error.hpp"
#include "facing/fft.hpp"

namespace facing::dsp {
namespace {

void require_same_rate(int a, int b, const char* op) {
    if (a != b) throw InvalidInput(std::string(op) + ": sample-rate mismatch");
}

}  // namespace

double sinc_kernel(double u) {
    constexpr double half = kSincHalfWidth + 1;
    if (std::abs(u) >= half) return 0.0;
    const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * u / half));
    if (std::abs(u) < 1e-12) return window;
    const double pu = std::numbers::pi * u;
    return window * std::sin(pu) / pu;
}

std::size_t default_channel_len(int sample_rate) {
    return static_cast<std::size_t>(std::lround(kDefaultChannelSeconds * sample_rate));
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    if (std::min(a.size(), b.size()) <= 32) {
        std::vector<double> out(out_len, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
        return out;
    }
    const std::size_t n = fft::good_size(out_len);
    auto fa = fft::forward(a, n);
    const auto fb = fft::forward(b, n);
    for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
    auto out = fft::inverse(fa, n);
    out.resize(out_len);
    return out;
}

Signal convolve(const Signal& v, const ImpulseResponse& h) {
    require_same_rate(v.sample_rate, h.sample_rate, "convolve");
    return {convolve(v.samples, h.taps), v.sample_rate};
}

std::vector<double> circular_deconvolve(std::span<const double> x, std::span<const double> v,
                                        std::size_t nfft, double reg) {
    if (reg < 0.0) throw InvalidInput("deconvolve: regularization must be non-negative");
    if (energy(v) == 0.0) throw DegenerateInput("deconvolve: reference signal is all zeros");
    auto fx = fft::forward(x, nfft);
    const auto fv = fft::forward(v, nfft);
    double peak = 0.0;
    for (const auto& c : fv) peak = std::max(peak, std::norm(c));
    const double floor = reg * peak;
    for (std::size_t k = 0; k < fx.size(); ++k) {
        const double denom = std::norm(fv[k]) + floor;
        fx[k] = denom > 0.0 ? fx[k] * std::conj(fv[k]) / denom : 0.0;
    }
    return fft::inverse(fx, nfft);
}

ImpulseResponse deconvolve(const Signal& x, const Signal& v, std::size_t channel_len, double reg) {
    require_same_rate(x.sample_rate, v.sample_rate, "deconvolve");
    if (channel_len == 0) throw InvalidInput("deconvolve: channel length must be positive");
    if (v.size() < channel_len) throw InvalidInput("deconvolve: reference shorter than channel length");
    const std::size_t n = fft::good_size(std::max(x.size(), v.size()) + channel_len);
    auto h = circular_deconvolve(x.samples, v.samples, n, reg);
    h.resize(channel_len);
    return {std::move(h), x.sample_rate};
}

int Correlation::argmax_lag() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        } else if (values[i] == values[best] && std::abs(lags[i]) < std::abs(lags[best])) {
            best = i;
        }
    }
    return lags.at(best);
}

Correlation cross_correlate(const Signal& a, const Signal& b, std::optional<std::size_t> max_lag) {
    require_same_rate(a.sample_rate, b.sample_rate, "cross_correlate");
    const std::size_t shortest = std::min(a.size(), b.size());
    if (shortest == 0) throw InvalidInput("cross_correlate: empty input");
    const std::size_t lag_limit = max_lag.value_or(shortest / 2);
    if (lag_limit >= shortest) throw InvalidInput("cross_correlate: max_lag must be below the input length");

    const std::size_t n = fft::good_size(a.size() + b.size());
    auto fa = fft::forward(a.samples, n);
    const auto fb = fft::forward(b.samples, n);
    for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= std::conj(fb[k]);
    const auto circ = fft::inverse(fa, n);

    Correlation out;
    const int limit = static_cast<int>(lag_limit);
    out.lags.reserve(2 * lag_limit + 1);
    out.values.reserve(2 * lag_limit + 1);
    for (int lag = -limit; lag <= limit; ++lag) {
        out.lags.push_back(lag);
        out.values.push_back(circ[lag >= 0 ? static_cast<std::size_t>(lag) : n - static_cast<std::size_t>(-lag)]);
    }
    return out;
}

double sinc_interpolate(std::span<const double> x, double position) {
    const long centre = static_cast<long>(std::floor(position));
    double acc = 0.0;
    for (long k = centre - kSincHalfWidth; k <= centre + kSincHalfWidth + 1; ++k) {
        if (k < 0 || k >= static_cast<long>(x.size())) continue;
        acc += x[static_cast<std::size_t>(k)] * sinc_kernel(position - static_cast<double>(k));
    }
    return acc;
}

std::vector<double> integer_shift(std::span<const double> x, long delay) {
    const long n = static_cast<long>(x.size());
    std::vector<double> y(x.size(), 0.0);
    for (long t = std::max(0L, delay); t < std::min(n, n + delay); ++t)
        y[static_cast<std::size_t>(t)] = x[static_cast<std::size_t>(t - delay)];
    return y;
}

std::vector<double> fractional_shift(std::span<const double> x, double delay) {
    if (!std::isfinite(delay)) throw InvalidInput("fractional_shift: non-finite delay");
    const double whole = std::floor(delay);
    const double frac = delay - whole;
    if (frac == 0.0) return integer_shift(x, static_cast<long>(whole));

    // y[t] = sum_k x[t - whole - k] * kernel(k - frac)
    double kernel[2 * kSincHalfWidth + 1];
    for (int k = -kSincHalfWidth; k <= kSincHalfWidth; ++k) kernel[k + kSincHalfWidth] = sinc_kernel(k - frac);

    const long n = static_cast<long>(x.size());
    const long base = static_cast<long>(whole);
    std::vector<double> y(x.size(), 0.0);
    for (long t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int k = -kSincHalfWidth; k <= kSincHalfWidth; ++k) {
            const long src = t - base - k;
            if (src >= 0 && src < n) acc += x[static_cast<std::size_t>(src)] * kernel[k + kSincHalfWidth];
        }
        y[static_cast<std::size_t>(t)] = acc;
    }
    return y;
}

Signal delay_sum_aoa(std::span<const Signal> mics, std::span<const double> delays) {
    if (mics.empty()) throw InvalidInput("delay_sum_aoa: no microphone signals");
    if (delays.size() != mics.size()) throw InvalidInput("delay_sum_aoa: need one delay per microphone");
    const auto len = mics.front().size();
    const int rate = mics.front().sample_rate;
    for (const auto& m : mics) {
        if (m.size() != len) throw InvalidInput("delay_sum_aoa: microphone signals differ in length");
        require_same_rate(m.sample_rate, rate, "delay_sum_aoa");
    }
    Signal out{std::vector<double>(len, 0.0), rate};
    for (std::size_t j = 0; j < mics.size(); ++j) {
        const auto shifted = fractional_shift(mics[j].samples, delays[j]);
        for (std::size_t t = 0; t < len; ++t) out.samples[t] += shifted[t];
    }
    return out;
}

Alignment align_correlate_detailed(std::span<const Signal> signals, std::optional<std::size_t> max_lag) {
    if (signals.size() < 2) throw InvalidInput("align_correlate: needs at least two signals");
    const auto& ref = signals.front();
    Alignment out{{ref.samples, ref.sample_rate}, {0}};
    for (std::size_t j = 1; j < signals.size(); ++j) {
        require_same_rate(signals[j].sample_rate, ref.sample_rate, "align_correlate");
        const int lag = cross_correlate(ref, signals[j], max_lag).argmax_lag();
        out.lags.push_back(lag);
        // X_j(t - lag) sampled on the reference time base.
        const long len = static_cast<long>(ref.size());
        const long src_len = static_cast<long>(signals[j].size());
        for (long t = 0; t < len; ++t) {
            const long src = t - lag;
            if (src >= 0 && src < src_len) out.sum.samples[static_cast<std::size_t>(t)] += signals[j].samples[static_cast<std::size_t>(src)];
        }
    }
    return out;
}

Signal align_correlate(std::span<const Signal> signals) { return align_correlate_detailed(signals).sum; }

}  // namespace facing::dsp
