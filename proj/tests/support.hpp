#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "facing/scene.hpp"
#include "facing/signal.hpp"

namespace testing {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

inline facing::Signal gaussian_signal(std::size_t n, std::uint64_t seed, int fs = 16000) {
    return {gaussian(n, seed), fs};
}

// Textbook O(n*m) linear convolution.
inline std::vector<double> direct_convolve(std::span<const double> a, std::span<const double> b) {
    std::vector<double> y(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
    return y;
}

// sum_t a(t) b(t - lag), zero outside the supports.
inline double direct_correlate(std::span<const double> a, std::span<const double> b, long lag) {
    double s = 0.0;
    for (long t = 0; t < static_cast<long>(a.size()); ++t) {
        const long u = t - lag;
        if (u >= 0 && u < static_cast<long>(b.size())) s += a[static_cast<std::size_t>(t)] * b[static_cast<std::size_t>(u)];
    }
    return s;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// Anechoic 5 x 5 m scene with devices at the given positions; the user faces `faced`.
inline facing::Scene ring_scene(facing::Vec2 user, std::span<const facing::Vec2> devices, std::size_t faced,
                                std::uint64_t seed = 1) {
    facing::Scene s;
    s.room = {5.0, 5.0, 0.5, 0};
    s.user.position = user;
    for (std::size_t i = 0; i < devices.size(); ++i)
        s.devices.push_back({devices[i], 0.3 + 0.7 * static_cast<double>(i), facing::kDefaultMicCount,
                             facing::kDefaultArrayRadius});
    s.user.facing = facing::wrap_2pi(facing::bearing(user, devices[faced]));
    s.seed = seed;
    return s;
}

}  // namespace testing
