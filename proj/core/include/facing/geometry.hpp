#pragma once

#include <cmath>
#include <numbers>

namespace facing {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Global bearing of `to` seen from `from`, in (-pi, pi].
inline double bearing(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

/// Wraps to [0, 2pi).
inline double wrap_2pi(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    return r >= two_pi ? 0.0 : r;
}

/// Wraps to [-pi, pi).
inline double wrap_pi(double a) { return wrap_2pi(a + std::numbers::pi) - std::numbers::pi; }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace facing
