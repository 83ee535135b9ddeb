#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "facing/scene.hpp"
#include "facing/signal.hpp"

namespace facing::sim {

inline constexpr double kMinDistance = 0.1;  // m, clamps the 1/d law near the source

/// Unit-RMS source waveform, deterministic per seed.
[[nodiscard]] Signal make_source(SourceKind kind, double duration, int sample_rate, std::uint64_t seed);

/// A sound emitter. A null pattern radiates omnidirectionally with unit gain.
struct Emitter {
    Vec2 position;
    double facing = 0.0;
    const RadiationPattern* pattern = nullptr;
};

/// Image-source channel from an emitter to a receiver in a rectangular room.
/// Each path contributes G(departure) * (1 - absorption)^bounces / max(length, kMinDistance)
/// at delay length / c, placed with a windowed-sinc fractional delay.
[[nodiscard]] ImpulseResponse synth_channel(const Room& room, int sample_rate, const Emitter& emitter,
                                            Vec2 receiver, int reflection_order);

/// Channel from the scene's user to mic `mic` of device `device`. Throws InvalidInput on bad indices.
[[nodiscard]] ImpulseResponse synth_channel(const Scene& scene, std::size_t device, std::size_t mic,
                                            int reflection_order);

struct GroundTruth {
    Signal source;  // v(t), loudness applied, without lead-in
    std::vector<std::vector<ImpulseResponse>> channels;  // [device][mic]
    std::vector<double> los_amplitudes;  // G(phi_i) / d_i at the array centre
    std::vector<double> aoas;            // rad, user direction in each device frame
    std::vector<double> distances;       // m, user to array centre
    std::size_t onset = 0;               // first voiced sample index in the observations
    double noise_floor_db = 0.0;         // effective level used
    double snr_tilde_db = 0.0;           // measured (signal+noise)/noise, averaged over mics
};

struct Recording {
    std::vector<std::vector<Signal>> observations;  // [device][mic]
    GroundTruth truth;
};

struct RecordOptions {
    /// Overrides the scene's noise floor so the averaged SNR~ hits this target.
    std::optional<double> snr_tilde_db;
    /// Defaults to the scene's reflection order.
    std::optional<int> reflection_order;
};

[[nodiscard]] Recording record(const Scene& scene, const RecordOptions& options = {});

/// (signal+noise)/noise in dB: power of [onset, onset+voiced) over power of the pre-onset window
/// (up to 100 ms immediately before onset). +inf when the pre-onset window is silent.
[[nodiscard]] double measure_snr_tilde(std::span<const double> x, std::size_t onset, std::size_t voiced,
                                       int sample_rate);

/// What mic signals of `receiver` capture when device `emitter` plays `sound` omnidirectionally
/// from its array centre. Noise follows the scene's noise floor.
[[nodiscard]] std::vector<Signal> record_emission(const Scene& scene, std::size_t emitter, std::size_t receiver,
                                                  const Signal& sound);

}  // namespace facing::sim
