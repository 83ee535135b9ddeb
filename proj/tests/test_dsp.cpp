#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "facing/dsp.hpp"
#include "facing/error.hpp"
#include "facing/fft.hpp"
#include "support.hpp"

using namespace facing;
using testing::direct_convolve;
using testing::direct_correlate;
using testing::gaussian;

TEST_CASE("fft forward matches a naive DFT") {
    const auto x = gaussian(45, 3);
    const std::size_t n = 60;
    const auto bins = fft::forward(x, n);
    REQUIRE(bins.size() == n / 2 + 1);
    for (std::size_t k = 0; k < bins.size(); ++k) {
        std::complex<double> ref = 0.0;
        for (std::size_t t = 0; t < x.size(); ++t)
            ref += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
        CHECK(std::abs(bins[k] - ref) < 1e-9);
    }
    const auto back = fft::inverse(bins, n);
    for (std::size_t t = 0; t < n; ++t) CHECK(back[t] == doctest::Approx(t < x.size() ? x[t] : 0.0).epsilon(1e-12));
}

TEST_CASE("good_size returns 7-smooth sizes") {
    CHECK(fft::good_size(1) == 1);
    CHECK(fft::good_size(11) == 12);
    CHECK(fft::good_size(1601) == 1620);
    for (std::size_t n : {97u, 1000u, 4099u, 17000u}) {
        auto m = fft::good_size(n);
        CHECK(m >= n);
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (m % p == 0) m /= p;
        CHECK(m == 1);
    }
}

TEST_CASE("convolve small cases") {
    CHECK(dsp::convolve(Signal{{1, 2, 3}, 16000}, ImpulseResponse{{1}, 16000}).samples == std::vector<double>{1, 2, 3});
    CHECK(dsp::convolve(Signal{{1, 0, 0}, 16000}, ImpulseResponse{{0, 0.5}, 16000}).samples ==
          std::vector<double>{0, 0.5, 0, 0});
    CHECK_THROWS_AS((void)dsp::convolve(Signal{{1}, 16000}, ImpulseResponse{{1}, 8000}), InvalidInput);
}

TEST_CASE("convolve matches the direct sum") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 1 + (seed * 211) % 4096, m = 1 + (seed * 97) % 900;
        const auto a = gaussian(n, seed), b = gaussian(m, seed + 100);
        const auto fast = dsp::convolve(a, b);
        const auto ref = direct_convolve(a, b);
        REQUIRE(fast.size() == ref.size());
        CHECK(testing::max_abs_diff(fast, ref) <= 1e-9 * std::max(1.0, testing::max_abs(ref)));
    }
    const auto v = gaussian(64, 1), h = gaussian(16, 2);
    CHECK(testing::max_abs_diff(dsp::convolve(v, h), direct_convolve(v, h)) < 1e-9);
}

TEST_CASE("convolve is linear") {
    const auto a = gaussian(300, 1), b = gaussian(300, 2), h = gaussian(40, 3);
    std::vector<double> mix(300);
    for (std::size_t i = 0; i < 300; ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto ya = dsp::convolve(a, h), yb = dsp::convolve(b, h), ym = dsp::convolve(mix, h);
    for (std::size_t i = 0; i < ym.size(); ++i) CHECK(ym[i] == doctest::Approx(2.0 * ya[i] - 0.5 * yb[i]).epsilon(1e-9));
}

TEST_CASE("cross_correlate conventions") {
    const Signal ones{{1, 1, 1}, 16000};
    CHECK(dsp::cross_correlate(ones, ones, 2).argmax_lag() == 0);

    // b leads a by five samples: b(t) = a(t + 5).
    const auto base = gaussian(600, 9);
    Signal a{{base.begin(), base.begin() + 500}, 16000};
    Signal b{{base.begin() + 5, base.begin() + 505}, 16000};
    CHECK(dsp::cross_correlate(a, b, 50).argmax_lag() == 5);
    CHECK(dsp::cross_correlate(b, a, 50).argmax_lag() == -5);
}

TEST_CASE("cross_correlate matches the double loop") {
    const auto a = gaussian(256, 4), b = gaussian(256, 5);
    const auto c = dsp::cross_correlate(Signal{a, 16000}, Signal{b, 16000});
    REQUIRE(c.lags.front() == -128);
    REQUIRE(c.lags.back() == 128);
    for (std::size_t i = 0; i < c.lags.size(); ++i) CHECK(std::abs(c.values[i] - direct_correlate(a, b, c.lags[i])) < 1e-9);

    const auto swapped = dsp::cross_correlate(Signal{b, 16000}, Signal{a, 16000});
    for (int lag = -128; lag <= 128; ++lag) CHECK(swapped.at(lag) == doctest::Approx(c.at(-lag)).epsilon(1e-9));
    CHECK_THROWS_AS((void)dsp::cross_correlate(Signal{a, 16000}, Signal{b, 16000}, 256), InvalidInput);
}

TEST_CASE("cross_correlate argmax is shift-equivariant") {
    const auto base = gaussian(2000, 12);
    const Signal a{{base.begin() + 100, base.begin() + 1100}, 16000};
    for (int s = -40; s <= 40; s += 7) {
        const Signal b{{base.begin() + 100 + s, base.begin() + 1100 + s}, 16000};
        CHECK(dsp::cross_correlate(a, b, 60).argmax_lag() == s);
    }
}

TEST_CASE("deconvolve self and pure delay") {
    const auto v = testing::gaussian_signal(4000, 21);
    const auto self = dsp::deconvolve(v, v, 32);
    REQUIRE(self.size() == 32);
    CHECK(self.taps[0] == doctest::Approx(1.0).epsilon(0.05));
    for (std::size_t k = 1; k < 32; ++k) CHECK(std::abs(self.taps[k]) < 0.02);

    Signal delayed{dsp::integer_shift(v.samples, 7), 16000};
    const auto h = dsp::deconvolve(delayed, v, 64);
    CHECK(std::max_element(h.taps.begin(), h.taps.end()) - h.taps.begin() == 7);

    CHECK_THROWS_AS((void)dsp::deconvolve(v, Signal{std::vector<double>(100, 0.0), 16000}, 32), DegenerateInput);
    CHECK_THROWS_AS((void)dsp::deconvolve(v, Signal{gaussian(16, 1), 16000}, 32), InvalidInput);
}

TEST_CASE("deconvolve recovers a three-tap channel") {
    const auto v = testing::gaussian_signal(8000, 31);
    const std::vector<double> truth{0, 0, 0, 0, 0, 0.8, 0, 0, 0, 0, 0, 0, 0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.3};
    const auto x = dsp::convolve(v, ImpulseResponse{truth, 16000});
    const auto h = dsp::deconvolve(x, v, 64);
    auto first = std::find_if(h.taps.begin(), h.taps.end(), [](double t) { return std::abs(t) > 0.2; });
    CHECK(std::abs(static_cast<long>(first - h.taps.begin()) - 5) <= 1);
    for (std::size_t k : {5u, 12u, 22u}) CHECK(std::abs(h.taps[k] - truth[k]) / std::abs(truth[k]) < 0.05);
}

TEST_CASE("deconvolve round trip over random sparse channels") {
    int argmax_hits = 0;
    std::vector<double> amp_errors;
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const auto v = testing::gaussian_signal(4000, 1000 + static_cast<std::uint64_t>(trial));
        std::vector<double> h(128, 0.0);
        const int taps = 1 + static_cast<int>(rng() % 8);
        std::size_t strongest = 0;
        for (int k = 0; k < taps; ++k) {
            const auto at = static_cast<std::size_t>(rng() % 128);
            h[at] = (k == 0 ? 1.0 : 0.6) * std::uniform_real_distribution<double>(0.3, 1.0)(rng);
        }
        strongest = static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
        auto x = dsp::convolve(v, ImpulseResponse{h, 16000});
        const double sigma = rms(x.samples) * std::pow(10.0, -40.0 / 20.0);
        const auto noise = gaussian(x.size(), 5000 + static_cast<std::uint64_t>(trial), sigma);
        for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += noise[i];
        const auto est = dsp::deconvolve(x, v, 128);
        const auto found = static_cast<std::size_t>(std::max_element(est.taps.begin(), est.taps.end()) - est.taps.begin());
        argmax_hits += found == strongest;
        amp_errors.push_back(std::abs(est.taps[strongest] - h[strongest]) / h[strongest]);
    }
    std::nth_element(amp_errors.begin(), amp_errors.begin() + 100, amp_errors.end());
    CHECK(argmax_hits >= 198);
    CHECK(amp_errors[100] < 0.05);
}

TEST_CASE("fractional_shift matches an analytic band-limited signal") {
    // Sum of in-band sinusoids sampled at t - d is the exact shifted signal.
    auto tone = [](double t) { return std::sin(0.3 * t) + 0.5 * std::cos(1.1 * t + 0.4) + 0.25 * std::sin(2.2 * t); };
    std::vector<double> x(400);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = tone(static_cast<double>(t));
    for (double d : {0.5, -0.25, 3.7, -6.3}) {
        const auto y = dsp::fractional_shift(x, d);
        for (std::size_t t = 40; t < 360; ++t) CHECK(std::abs(y[t] - tone(static_cast<double>(t) - d)) < 2e-3);
    }
    const auto same = dsp::fractional_shift(x, 0.0);
    CHECK(testing::max_abs_diff(same, x) < 1e-12);
}

TEST_CASE("delay_sum_aoa coherent sums") {
    const auto s = testing::gaussian_signal(1000, 41);
    const std::vector<Signal> copies(4, s);
    const std::vector<double> zero(4, 0.0);
    const auto sum = dsp::delay_sum_aoa(copies, zero);
    for (std::size_t t = 0; t < s.size(); ++t) CHECK(sum.samples[t] == doctest::Approx(4.0 * s.samples[t]));

    // Two copies offset by +-0.5 samples, compensated: peak at least 1.99x a single copy.
    std::vector<double> pulse(200, 0.0);
    for (std::size_t t = 0; t < pulse.size(); ++t) {
        const double u = static_cast<double>(t) - 100.0;
        pulse[t] = std::exp(-u * u / 50.0);
    }
    const std::vector<Signal> pair{{dsp::fractional_shift(pulse, 0.5), 16000}, {dsp::fractional_shift(pulse, -0.5), 16000}};
    const std::vector<double> undo{-0.5, 0.5};
    const auto aligned = dsp::delay_sum_aoa(pair, undo);
    CHECK(testing::max_abs(aligned.samples) >= 1.99 * testing::max_abs(pulse));

    CHECK_THROWS_AS((void)dsp::delay_sum_aoa(copies, std::vector<double>(3, 0.0)), InvalidInput);
    std::vector<Signal> ragged = copies;
    ragged[2].samples.pop_back();
    CHECK_THROWS_AS((void)dsp::delay_sum_aoa(ragged, zero), InvalidInput);
}

TEST_CASE("delay_sum_aoa is linear in each input") {
    const std::vector<Signal> a{testing::gaussian_signal(300, 1), testing::gaussian_signal(300, 2)};
    std::vector<Signal> b = a;
    b[1] = testing::gaussian_signal(300, 3);
    const std::vector<double> d{0.3, -1.7};
    const auto ya = dsp::delay_sum_aoa(a, d), yb = dsp::delay_sum_aoa(b, d);
    std::vector<Signal> mix = a;
    for (std::size_t t = 0; t < 300; ++t) mix[1].samples[t] = 3.0 * a[1].samples[t] - 2.0 * b[1].samples[t];
    const auto ym = dsp::delay_sum_aoa(mix, d);
    for (std::size_t t = 0; t < 300; ++t) CHECK(ym.samples[t] == doctest::Approx(3.0 * ya.samples[t] - 2.0 * yb.samples[t]));
}

TEST_CASE("delay_sum_aoa white-noise SNR gain is about M") {
    constexpr int kMics = 6;
    double gain_db_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = gaussian(2000, 9000 + static_cast<std::uint64_t>(trial));
        std::vector<Signal> mics;
        for (int j = 0; j < kMics; ++j) {
            auto n = gaussian(2000, 20000 + static_cast<std::uint64_t>(trial * kMics + j));
            for (std::size_t t = 0; t < n.size(); ++t) n[t] += s[t];
            mics.push_back({n, 16000});
        }
        const auto out = dsp::delay_sum_aoa(mics, std::vector<double>(kMics, 0.0));
        double sig = 0.0, noise = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) {
            sig += kMics * kMics * s[t] * s[t];
            const double r = out.samples[t] - kMics * s[t];
            noise += r * r;
        }
        double in_noise = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) in_noise += std::pow(mics[0].samples[t] - s[t], 2);
        double in_sig = std::inner_product(s.begin(), s.end(), s.begin(), 0.0);
        gain_db_sum += 10.0 * std::log10((sig / noise) / (in_sig / in_noise));
    }
    CHECK(std::abs(gain_db_sum / 100.0 - 10.0 * std::log10(kMics)) < 1.0);
}

TEST_CASE("align_correlate undoes integer shifts") {
    const auto base = gaussian(3000, 51);
    auto window = [&](int shift) {
        return Signal{{base.begin() + 500 - shift, base.begin() + 2500 - shift}, 16000};
    };
    const std::vector<Signal> copies{window(0), window(13), window(-4)};
    const auto al = dsp::align_correlate_detailed(copies);
    CHECK(al.lags == std::vector<int>{0, -13, 4});
    for (std::size_t t = 100; t < 1900; ++t) CHECK(std::abs(al.sum.samples[t] - 3.0 * copies[0].samples[t]) < 1e-6);

    CHECK_THROWS_AS((void)dsp::align_correlate(std::vector<Signal>{copies[0]}), InvalidInput);
}

TEST_CASE("align_correlate dominant tap is the sum of the dominant taps") {
    const auto v = testing::gaussian_signal(6000, 61);
    const std::vector<double> gains{1.0, 0.7, 0.4};
    const std::vector<std::size_t> lags{3, 40, 17};
    std::vector<Signal> xs;
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> h(lags[i] + 1, 0.0);
        h[lags[i]] = gains[i];
        auto x = dsp::convolve(v, ImpulseResponse{h, 16000});
        x.samples.resize(6100);
        xs.push_back(x);
    }
    double expected = 0.0;
    for (const auto& x : xs) {
        const auto hi = dsp::deconvolve(x, v, 200);
        expected += *std::max_element(hi.taps.begin(), hi.taps.end());
    }
    const auto sum = dsp::align_correlate(xs);
    const auto h = dsp::deconvolve(sum, v, 200);
    CHECK(*std::max_element(h.taps.begin(), h.taps.end()) == doctest::Approx(expected).epsilon(0.01));
    CHECK(expected == doctest::Approx(2.1).epsilon(0.05));
}
