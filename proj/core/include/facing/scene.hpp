#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "facing/geometry.hpp"

namespace facing {

inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr int kDefaultMicCount = 6;
inline constexpr double kDefaultArrayRadius = 0.046;  // m
inline constexpr int kDefaultSampleRate = 16000;

/// Linear amplitude gain of the voice per degree of departure angle; index 0 is the facing direction.
struct RadiationPattern {
    std::string name;
    std::array<double, 360> gains{};
};

/// Checks all gains > 0 and that the maximum lies within +-30 degrees of the front.
void validate(const RadiationPattern& p);

/// Gain at a departure angle (radians), linearly interpolated between degree bins, 2pi-periodic.
[[nodiscard]] double pattern_gain(const RadiationPattern& p, double departure_angle);

/// Synthetic stand-ins for measured voice patterns: cardioid (default), frontal, average, distorted.
[[nodiscard]] const std::vector<RadiationPattern>& builtin_patterns();
[[nodiscard]] const RadiationPattern& pattern_by_name(std::string_view name);
[[nodiscard]] const RadiationPattern& default_pattern();

struct DevicePose {
    Vec2 position;
    double orientation = 0.0;  // rad, heading of mic 0 in the global frame
    int mic_count = kDefaultMicCount;
    double array_radius = kDefaultArrayRadius;  // m
};

/// Uniform circular array; mic 0 sits at the orientation angle.
[[nodiscard]] std::vector<Vec2> mic_positions(const DevicePose& d);
/// Mic offsets from the array centre in the device frame (orientation ignored).
[[nodiscard]] std::vector<Vec2> mic_offsets_local(const DevicePose& d);

struct UserPose {
    Vec2 position;
    double facing = 0.0;  // rad, global frame, [0, 2pi)
    double loudness_db = 0.0;
};

enum class SourceKind { gaussian, speech_like, chirp };

[[nodiscard]] std::string_view to_string(SourceKind k);
[[nodiscard]] SourceKind parse_source_kind(std::string_view s);

struct Room {
    double width = 5.0;   // m, x extent
    double depth = 5.0;   // m, y extent
    double absorption = 0.5;
    int reflection_order = 2;
};

struct Scene {
    Room room;
    std::vector<DevicePose> devices;
    UserPose user;
    /// Per-mic white-noise level in dB re a unit-RMS source; -inf disables noise.
    double noise_floor_db = -std::numeric_limits<double>::infinity();
    SourceKind source = SourceKind::gaussian;
    double duration = 1.0;  // s of voiced source
    double lead_in = 0.125;  // s of silence before onset
    int sample_rate = kDefaultSampleRate;
    std::uint64_t seed = 1;
    std::string pattern = "cardioid";
};

/// Throws ConfigError naming the offending field.
void validate(const Scene& s);

[[nodiscard]] bool inside(const Room& r, Vec2 p);

}  // namespace facing
