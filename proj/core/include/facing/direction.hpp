#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "facing/aoa.hpp"
#include "facing/dsp.hpp"
#include "facing/locate.hpp"
#include "facing/scene.hpp"
#include "facing/signal.hpp"

namespace facing::direction {

struct ChannelOptions {
    double threshold = 1e-3;  // stop once the relative L2 change of the source estimate drops below this
    int max_iterations = 20;
    std::size_t channel_len = 0;  // 0 selects dsp::default_channel_len
    double reg = dsp::kDefaultDeconvReg;
    double guard_seconds = 0.01;  // lag at which the earliest device's strongest tap is held
    bool stop_at_threshold = true;  // false runs all max_iterations (convergence studies)
};

struct IterationRecord {
    Signal source;  // source estimate the channels were deconvolved against
    std::vector<ImpulseResponse> device_channels;
    ImpulseResponse global_channel;
    double residual = 0.0;  // relative L2 change to the next source estimate
};

struct IterationTrace {
    std::vector<IterationRecord> iterations;
    int iterations_used = 0;
    bool converged = false;
    bool diverged = false;  // residual grew three iterations in a row
    std::size_t best_iteration = 0;

    /// Converged (or last) iteration; the lowest-residual one after divergence.
    [[nodiscard]] const IterationRecord& result() const;
};

/// Iterative joint estimation of the source and the per-device channels from locally combined
/// device signals. Needs at least two devices.
[[nodiscard]] IterationTrace estimate_channels(std::span<const Signal> per_device, const ChannelOptions& options = {});

struct LosOptions {
    double peak_fraction = 0.3;  // gamma
    double window_seconds = 0.02;  // search span preceding the strongest tap
    bool interpolate_peak = true;  // search the band-limited reconstruction instead of raw taps
};

struct LosPowers {
    std::vector<double> powers;
    std::vector<bool> nonpositive;  // channel had no positive tap; power forced to 0
};

/// A_i is the first local maximum above gamma * max(h_i) within the window before the strongest tap;
/// power is A_i^2.
[[nodiscard]] LosPowers extract_los_power(std::span<const ImpulseResponse> channels, const LosOptions& options = {});
[[nodiscard]] LosPowers extract_los_power(const IterationTrace& trace, const LosOptions& options = {});

/// P*_i = P_i * d_i^2. Throws InvalidInput for non-positive distances.
[[nodiscard]] std::vector<double> equalize(std::span<const double> powers, std::span<const double> distances);

struct MatchOptions {
    double gain_exponent = 2.0;  // expected powers use G^exponent
};

/// Pearson correlation, 0 when either side has zero variance.
[[nodiscard]] double pearson(std::span<const double> a, std::span<const double> b);

struct FacingDecision {
    std::size_t device_index = 0;
    Vec2 user_location;
    std::size_t cluster_size = 0;
    std::vector<double> aoas;
    std::vector<double> distances;
    std::vector<double> los_powers;
    std::vector<double> equalized_powers;
    std::vector<double> correlations;
    IterationTrace trace;
};

/// Circular correlation of equalized powers with the pattern: candidate k hypothesises the user
/// faces device k. Ties go to the larger P*_k, then the smaller index.
[[nodiscard]] FacingDecision match_pattern(std::span<const double> equalized, std::span<const Vec2> positions, Vec2 user,
                                           const RadiationPattern& pattern, const MatchOptions& options = {});

struct InferParams {
    ChannelOptions channels;
    LosOptions los;
    MatchOptions match;
    locate::TriangulateOptions triangulation;
    bool keep_trace = false;  // drop per-iteration signals from the decision unless asked
};

/// Full pipeline: AoA per device, triangulation, delay-and-sum, channel estimation,
/// LoS power, distance equalization, pattern matching.
[[nodiscard]] FacingDecision infer(const std::vector<std::vector<Signal>>& observations,
                                   std::span<const DevicePose> devices, const RadiationPattern& pattern,
                                   const InferParams& params = {});

/// Layout view of device poses.
[[nodiscard]] locate::DeviceLayout layout_of(std::span<const DevicePose> devices);

/// Delay-and-sum of one device's mics steered at device-frame angle `angle`.
[[nodiscard]] Signal steer(std::span<const Signal> mics, const DevicePose& device, double angle);

}  // namespace facing::direction
