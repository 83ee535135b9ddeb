#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "facing/aoa.hpp"
#include "facing/dsp.hpp"
#include "facing/error.hpp"
#include "facing/simulate.hpp"
#include "support.hpp"

using namespace facing;

namespace {

// Far-field plane wave from device-frame angle `angle`, plus optional white noise.
std::vector<Signal> plane_wave(const DevicePose& d, double angle, std::uint64_t seed, double noise = 0.0) {
    const auto src = testing::gaussian(4000, seed);
    std::vector<Signal> mics;
    const auto delays = aoa::arrival_delays(d, angle, 16000);
    for (std::size_t j = 0; j < delays.size(); ++j) {
        auto x = dsp::fractional_shift(src, delays[j] + 40.0);
        if (noise > 0.0) {
            const auto n = testing::gaussian(x.size(), seed * 31 + j, noise);
            for (std::size_t t = 0; t < x.size(); ++t) x[t] += n[t];
        }
        mics.push_back({x, 16000});
    }
    return mics;
}

double angle_error_deg(double a, double b) { return std::abs(rad2deg(wrap_pi(a - b))); }

}  // namespace

TEST_CASE("gcc_phat recovers an integer shift") {
    const auto base = testing::gaussian(3000, 2);
    const Signal a{{base.begin() + 100, base.begin() + 2100}, 16000};
    const Signal b{{base.begin() + 103, base.begin() + 2103}, 16000};
    const auto g = aoa::gcc_phat(a, b, 20);
    CHECK(g.argmax_lag() == 3);
    CHECK(testing::max_abs(g.values) <= 1.0 + 1e-12);
    CHECK(g.at(3) > 0.8);
    CHECK_THROWS_AS((void)aoa::gcc_phat(Signal{std::vector<double>(64, 0.0), 16000}, a, 20), DegenerateInput);
}

TEST_CASE("gcc_phat ignores colouring with equal delay") {
    const auto x = testing::gaussian(4000, 7);
    // Two different symmetric FIR filters, both with group delay 4.
    const std::vector<double> f1{0.05, -0.1, 0.2, 0.4, 1.0, 0.4, 0.2, -0.1, 0.05};
    const std::vector<double> f2{-0.2, 0.3, 0.1, 0.6, 0.5, 0.6, 0.1, 0.3, -0.2};
    auto a = dsp::convolve(x, f1);
    auto b = dsp::convolve(dsp::integer_shift(x, -6), f2);
    const auto g = aoa::gcc_phat(Signal{a, 16000}, Signal{b, 16000}, 30);
    CHECK(g.argmax_lag() == 6);
}

TEST_CASE("gcc_phat contrast between coherent and unrelated pairs") {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        const auto base = testing::gaussian(2100, 100 + trial);
        const Signal a{{base.begin(), base.begin() + 2000}, 16000};
        const Signal b{{base.begin() + 2, base.begin() + 2002}, 16000};
        const Signal c = testing::gaussian_signal(2000, 900 + trial);
        const double coherent = testing::max_abs(aoa::gcc_phat(a, b, 20).values);
        const double unrelated = testing::max_abs(aoa::gcc_phat(a, c, 20).values);
        CHECK(unrelated < 0.2 * coherent);
    }
}

TEST_CASE("estimate_aoa on plane waves") {
    const DevicePose d{{0, 0}, 0.0, 6, 0.046};
    const auto est = aoa::estimate_aoa(plane_wave(d, deg2rad(90), 1), d);
    CHECK(angle_error_deg(est.angle, deg2rad(90)) <= 2.0);
    CHECK_FALSE(est.degenerate);
    for (int deg = 0; deg < 360; deg += 17) {
        const auto e = aoa::estimate_aoa(plane_wave(d, deg2rad(deg), 10 + static_cast<std::uint64_t>(deg), 0.05), d);
        CHECK(angle_error_deg(e.angle, deg2rad(deg)) <= 2.0);
        const double whole = rad2deg(e.angle);
        CHECK(std::abs(whole - std::round(whole)) < 1e-9);
        CHECK(e.angle >= 0.0);
        CHECK(e.angle < 2 * std::numbers::pi);
    }
}

TEST_CASE("estimate_aoa rejects odd or tiny arrays") {
    const DevicePose odd{{0, 0}, 0.0, 5, 0.046};
    CHECK_THROWS_AS((void)aoa::estimate_aoa(std::vector<Signal>(5, testing::gaussian_signal(500, 1)), odd), InvalidInput);
    const DevicePose two{{0, 0}, 0.0, 2, 0.046};
    CHECK_THROWS_AS((void)aoa::estimate_aoa(std::vector<Signal>(2, testing::gaussian_signal(500, 1)), two), InvalidInput);
}

TEST_CASE("device rotation shifts the device-frame estimate") {
    Scene s = testing::ring_scene({2.5, 2.5}, std::vector<Vec2>{{1.0, 1.2}, {4.0, 3.8}}, 0);
    const auto base = sim::record(s);
    const auto e0 = aoa::estimate_aoa(base.observations[0], s.devices[0]);
    const double alpha = 0.9;
    s.devices[0].orientation += alpha;
    const auto turned = sim::record(s);
    const auto e1 = aoa::estimate_aoa(turned.observations[0], s.devices[0]);
    CHECK(angle_error_deg(e1.angle, e0.angle - alpha) <= 2.0);
}

TEST_CASE("estimate_aoa follows the direct path over a weaker echo") {
    const DevicePose d{{0, 0}, 0.0, 6, 0.046};
    for (int trial = 0; trial < 10; ++trial) {
        const double los = deg2rad(30 + 31 * trial), echo = los + deg2rad(100);
        auto direct = plane_wave(d, los, 70 + static_cast<std::uint64_t>(trial));
        const auto src = testing::gaussian(4000, 70 + static_cast<std::uint64_t>(trial));
        const auto echo_delays = aoa::arrival_delays(d, echo, 16000);
        for (std::size_t j = 0; j < 6; ++j) {
            const auto e = dsp::fractional_shift(src, echo_delays[j] + 40.0 + 57.0);
            for (std::size_t t = 0; t < e.size(); ++t) direct[j].samples[t] += std::pow(10.0, -0.5) * e[t];
        }
        CHECK(angle_error_deg(aoa::estimate_aoa(direct, d).angle, los) <= 5.0);
    }
}

TEST_CASE("estimate_aoa is exactly scale invariant") {
    const DevicePose d{{0, 0}, 0.3, 6, 0.046};
    auto mics = plane_wave(d, deg2rad(200), 5, 0.2);
    const auto a = aoa::estimate_aoa(mics, d);
    for (auto& m : mics)
        for (auto& v : m.samples) v *= 37.5;
    CHECK(aoa::estimate_aoa(mics, d).angle == a.angle);
}

TEST_CASE("channel-based estimates") {
    const DevicePose d{{0, 0}, 0.0, 6, 0.046};
    const double truth = deg2rad(143);
    const auto delays = aoa::arrival_delays(d, truth, 16000);
    std::vector<ImpulseResponse> clean, echoed;
    for (double dl : delays) {
        std::vector<double> h(200, 0.0);
        for (std::size_t k = 0; k < h.size(); ++k) h[k] = dsp::sinc_kernel(static_cast<double>(k) - 50.0 - dl);
        clean.push_back({h, 16000});
        for (std::size_t k = 0; k < h.size(); ++k) h[k] += 0.4 * dsp::sinc_kernel(static_cast<double>(k) - 120.0);
        echoed.push_back({h, 16000});
    }
    const auto a = aoa::estimate_aoa_from_channels(clean, d);
    CHECK(angle_error_deg(a.angle, truth) <= 1.0);
    CHECK(angle_error_deg(aoa::estimate_aoa_from_channels(echoed, d).angle, a.angle) <= 2.0);

    std::vector<ImpulseResponse> same(6, clean.front());
    const auto deg = aoa::estimate_aoa_from_channels(same, d);
    CHECK(deg.degenerate);
    CHECK(deg.confidence == 0.0);
    CHECK(deg.angle == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("averaging pairs beats the best single pair") {
    std::vector<double> avg_err;
    std::vector<std::vector<double>> pair_err(3);
    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        const DevicePose d{{0, 0}, 0.0, 6, 0.046};
        const double truth = deg2rad(static_cast<double>((trial * 53) % 360));
        aoa::Options opts;
        opts.keep_curves = true;
        const auto est = aoa::estimate_aoa(plane_wave(d, truth, 500 + trial, 0.7), d, opts);
        avg_err.push_back(angle_error_deg(est.angle, truth));
        REQUIRE(est.per_pair_curves.size() == 3);
        for (std::size_t p = 0; p < 3; ++p) {
            const auto& curve = est.per_pair_curves[p];
            std::size_t arg = 0;
            for (std::size_t k = 1; k < curve.size(); ++k)
                if (std::abs(curve[k]) > std::abs(curve[arg])) arg = k;
            pair_err[p].push_back(angle_error_deg(deg2rad(static_cast<double>(arg)), truth));
        }
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + 100, v.end());
        return v[100];
    };
    double best_pair = 360.0;
    for (const auto& e : pair_err) best_pair = std::min(best_pair, median(e));
    CHECK(median(avg_err) <= best_pair);
}
