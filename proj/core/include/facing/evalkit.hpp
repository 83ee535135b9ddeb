#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "facing/direction.hpp"
#include "facing/locate.hpp"
#include "facing/scene.hpp"

namespace facing::eval {

inline constexpr int kCsvSchemaVersion = 1;

/// Angle at the user between the bearings to the true and the chosen device, degrees in [0, 180].
[[nodiscard]] double fde(std::span<const Vec2> positions, Vec2 user, std::size_t true_k, std::size_t chosen_k);

/// 0 when chosen == true; otherwise 1 + the number of other devices whose user-bearing lies strictly
/// inside the shorter arc between the two. Devices at exactly equal bearings are not counted.
[[nodiscard]] int fie(std::span<const Vec2> positions, Vec2 user, std::size_t true_k, std::size_t chosen_k);

/// Angle at the user between device k and its angularly nearest other device, degrees.
[[nodiscard]] double separation_deg(std::span<const Vec2> positions, Vec2 user, std::size_t k);

struct SceneSpec {
    Room room;
    std::size_t devices = 4;
    double min_separation_deg = 0.0;  // > 0 places devices on a ring around the user
    SourceKind source = SourceKind::gaussian;
    double duration = 1.0;
    int sample_rate = kDefaultSampleRate;
    std::string pattern = "cardioid";
};

struct GeneratedScene {
    Scene scene;
    std::size_t true_k = 0;
};

/// Random valid scene; the user faces a uniformly chosen device. Deterministic per seed.
[[nodiscard]] GeneratedScene random_scene(const SceneSpec& spec, std::uint64_t seed);

struct TrialResult {
    std::size_t scene_id = 0;
    std::size_t n_devices = 0;
    double snr_target_db = 0.0;
    std::string pattern;
    std::size_t true_k = 0;
    std::size_t chosen_k = 0;
    double fde = 0.0;
    int fie = 0;
    double loc_error = 0.0;
    double snr_tilde = 0.0;
    double separation = 0.0;
    int iterations = 0;
    double runtime_ms = 0.0;
};

struct SuiteConfig {
    std::vector<Room> rooms{Room{}};
    std::vector<std::size_t> device_counts{2, 4, 6};
    std::vector<double> snr_grid{30.0};  // SNR~ targets in dB; +inf records noiselessly
    std::vector<std::string> patterns{"cardioid"};  // patterns used for matching
    std::size_t trials_per_cell = 20;
    std::uint64_t seed = 1;
    SourceKind source = SourceKind::gaussian;
    double duration = 1.0;
    double min_separation_deg = 0.0;
    unsigned jobs = 0;  // 0 selects hardware concurrency
    direction::InferParams params;
};

struct SummaryRow {
    std::size_t n_devices = 0;
    double snr_target_db = 0.0;
    std::string pattern;
    std::size_t trials = 0;
    double accuracy = 0.0;
    double median_fde = 0.0;
    double median_loc_error = 0.0;
    std::vector<std::size_t> fie_histogram;  // counts for FIE 0, 1, 2, >=3
    double fie1_share_of_errors = 0.0;
    std::vector<std::size_t> bucket_trials;   // separation buckets 0-20, 20-40, 40-60, >=60 degrees
    std::vector<double> bucket_accuracy;
};

struct BenchmarkResult {
    std::vector<TrialResult> rows;  // sorted by (scene_id, pattern)
    std::vector<SummaryRow> summary;
};

[[nodiscard]] BenchmarkResult run_benchmark(const SuiteConfig& suite);
[[nodiscard]] std::vector<SummaryRow> summarize(std::span<const TrialResult> rows);

/// Per-trial rows without wall-clock timings, so a fixed seed always yields identical bytes.
[[nodiscard]] std::string trials_csv(std::span<const TrialResult> rows);
[[nodiscard]] std::string timings_csv(std::span<const TrialResult> rows);
[[nodiscard]] std::vector<TrialResult> parse_trials_csv(const std::string& text);
[[nodiscard]] std::string summary_json(std::span<const SummaryRow> summary);
[[nodiscard]] double median(std::vector<double> values);

struct ConvergeConfig {
    std::vector<double> snr_grid{30.0};
    std::vector<SourceKind> sources{SourceKind::gaussian, SourceKind::speech_like};
    std::size_t seeds = 20;
    std::uint64_t base_seed = 1;
    std::size_t devices = 4;
    int iterations = 10;
    Room room{5.0, 5.0, 0.5, 2};
    double duration = 1.0;
    unsigned jobs = 0;
    direction::ChannelOptions channels;
    direction::LosOptions los;
};

struct ConvergeRow {
    double snr_db = 0.0;
    SourceKind source = SourceKind::gaussian;
    int iteration = 0;
    double mean_correlation = 0.0;
    double median_correlation = 0.0;
};

/// Per iteration, Pearson correlation between estimated first-tap amplitudes and the true LoS
/// amplitudes, aggregated over seeded scenes.
[[nodiscard]] std::vector<ConvergeRow> converge_study(const ConvergeConfig& config);
[[nodiscard]] std::string converge_csv(std::span<const ConvergeRow> rows);

/// Per-scene first-tap correlation curve (one value per iteration).
[[nodiscard]] std::vector<double> first_tap_correlations(const Scene& scene, double snr_db, int iterations,
                                                         const direction::ChannelOptions& channels = {},
                                                         const direction::LosOptions& los = {});

/// Exact pairwise device-frame bearings for a set of poses, optionally perturbed by Gaussian noise.
[[nodiscard]] locate::PairwiseAoas pairwise_bearings(std::span<const DevicePose> devices, double noise_rad,
                                                     std::mt19937_64* rng = nullptr);

struct P2PRow {
    std::size_t trial = 0;
    std::size_t n_devices = 0;
    double noise_deg = 0.0;
    double residual_rms = 0.0;
    double rms_error = 0.0;     // after similarity alignment, m
    double median_error = 0.0;  // per-device, after alignment, m
};

struct P2PConfig {
    std::vector<std::size_t> device_counts{4, 6, 8};
    std::vector<double> noise_deg{0.0, 2.0};
    std::size_t trials = 20;
    std::uint64_t seed = 1;
    Room room{5.0, 5.0, 0.5, 2};
    locate::P2POptions options;
};

/// Anchors device 0's pose and the 0-1 distance, solves, and aligns to the truth.
[[nodiscard]] std::vector<P2PRow> p2p_study(const P2PConfig& config);
[[nodiscard]] std::string p2p_csv(std::span<const P2PRow> rows);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads (0 = hardware concurrency).
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace facing::eval
