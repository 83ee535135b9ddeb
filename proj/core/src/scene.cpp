#include "facing/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "facing/error.hpp"

namespace facing {
namespace {

RadiationPattern make_pattern(std::string name, auto&& gain_of) {
    RadiationPattern p{std::move(name), {}};
    for (int deg = 0; deg < 360; ++deg) p.gains[static_cast<std::size_t>(deg)] = gain_of(deg2rad(deg));
    return p;
}

std::vector<RadiationPattern> build_patterns() {
    auto cardioid = make_pattern("cardioid", [](double a) { return 0.6 + 0.4 * std::cos(a); });
    auto frontal = make_pattern("frontal", [](double a) {
        const double lobe = 0.5 * (1.0 + std::cos(a));
        return 0.15 + 0.85 * lobe * lobe;
    });
    RadiationPattern average{"average", {}};
    for (std::size_t i = 0; i < 360; ++i) average.gains[i] = 0.5 * (cardioid.gains[i] + frontal.gains[i]);
    // Rippled cardioid: +-25% lobes every 120 degrees.
    auto distorted = make_pattern("distorted", [](double a) {
        return (0.6 + 0.4 * std::cos(a)) * (1.0 + 0.25 * std::cos(3.0 * a));
    });
    return {cardioid, frontal, average, distorted};
}

}  // namespace

void validate(const RadiationPattern& p) {
    for (double g : p.gains)
        if (!(g > 0.0) || !std::isfinite(g)) throw InvalidInput("radiation pattern '" + p.name + "': gains must be positive");
    const auto peak = static_cast<int>(std::max_element(p.gains.begin(), p.gains.end()) - p.gains.begin());
    if (peak > 30 && peak < 330)
        throw InvalidInput("radiation pattern '" + p.name + "': maximum gain must lie within 30 degrees of the front");
}

double pattern_gain(const RadiationPattern& p, double departure_angle) {
    if (!std::isfinite(departure_angle)) throw InvalidInput("pattern_gain: non-finite angle");
    const double deg = rad2deg(wrap_2pi(departure_angle));
    const double lo = std::floor(deg);
    const double frac = deg - lo;
    const auto i0 = static_cast<std::size_t>(lo) % 360;
    const auto i1 = (i0 + 1) % 360;
    return (1.0 - frac) * p.gains[i0] + frac * p.gains[i1];
}

const std::vector<RadiationPattern>& builtin_patterns() {
    static const std::vector<RadiationPattern> patterns = build_patterns();
    return patterns;
}

const RadiationPattern& pattern_by_name(std::string_view name) {
    for (const auto& p : builtin_patterns())
        if (p.name == name) return p;
    throw InvalidInput("unknown radiation pattern '" + std::string(name) + "'");
}

const RadiationPattern& default_pattern() { return builtin_patterns().front(); }

std::vector<Vec2> mic_offsets_local(const DevicePose& d) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(d.mic_count));
    for (int j = 0; j < d.mic_count; ++j)
        out.push_back(d.array_radius * unit(2.0 * std::numbers::pi * j / d.mic_count));
    return out;
}

std::vector<Vec2> mic_positions(const DevicePose& d) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(d.mic_count));
    for (int j = 0; j < d.mic_count; ++j)
        out.push_back(d.position + d.array_radius * unit(d.orientation + 2.0 * std::numbers::pi * j / d.mic_count));
    return out;
}

std::string_view to_string(SourceKind k) {
    switch (k) {
        case SourceKind::gaussian: return "gaussian";
        case SourceKind::speech_like: return "speech_like";
        case SourceKind::chirp: return "chirp";
    }
    return "gaussian";
}

SourceKind parse_source_kind(std::string_view s) {
    if (s == "gaussian") return SourceKind::gaussian;
    if (s == "speech_like") return SourceKind::speech_like;
    if (s == "chirp") return SourceKind::chirp;
    throw InvalidInput("unknown source kind '" + std::string(s) + "'");
}

bool inside(const Room& r, Vec2 p) { return p.x > 0.0 && p.x < r.width && p.y > 0.0 && p.y < r.depth; }

void validate(const Scene& s) {
    if (!(s.room.width > 0.0) || !(s.room.depth > 0.0)) throw ConfigError("room: extents must be positive");
    if (!(s.room.absorption >= 0.0 && s.room.absorption <= 1.0)) throw ConfigError("room.absorption: must lie in [0, 1]");
    if (s.room.reflection_order < 0 || s.room.reflection_order > 3)
        throw ConfigError("room.reflection_order: must lie in [0, 3]");
    if (s.sample_rate <= 0) throw ConfigError("sample_rate: must be positive");
    if (!(s.duration > 0.0)) throw ConfigError("source.duration: must be positive");
    if (!(s.lead_in >= 0.0)) throw ConfigError("source.lead_in: must be non-negative");
    if (std::isnan(s.noise_floor_db) || s.noise_floor_db == std::numeric_limits<double>::infinity())
        throw ConfigError("noise_floor_db: must be finite or -inf");
    if (s.devices.size() < 2) throw ConfigError("devices: at least two devices required");
    if (!inside(s.room, s.user.position)) throw ConfigError("user.position: outside the room");
    if (!(s.user.facing >= 0.0 && s.user.facing < 2.0 * std::numbers::pi))
        throw ConfigError("user.facing: must lie in [0, 2pi)");
    for (std::size_t i = 0; i < s.devices.size(); ++i) {
        const auto& d = s.devices[i];
        const std::string field = "devices[" + std::to_string(i) + "]";
        if (!inside(s.room, d.position)) throw ConfigError(field + ".position: outside the room");
        if (d.mic_count < 4) throw ConfigError(field + ".mics: at least 4 microphones required");
        if (!(d.array_radius > 0.0)) throw ConfigError(field + ".radius: must be positive");
        if (distance(d.position, s.user.position) <= d.array_radius)
            throw ConfigError(field + ".position: coincides with the user");
    }
    try {
        (void)pattern_by_name(s.pattern);
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("pattern: ") + e.what());
    }
}

}  // namespace facing
