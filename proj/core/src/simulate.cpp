#include "facing/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "facing/dsp.hpp"
#include "facing/error.hpp"

namespace facing::sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void normalize_rms(std::vector<double>& x) {
    const double r = rms(x);
    if (r > 0.0)
        for (auto& v : x) v /= r;
}

std::vector<double> gaussian_noise(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

// Harmonic voicing with drifting pitch, slow onset and a few fricative-like noise bursts.
std::vector<double> speech_like(std::size_t n, int fs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double drift_rate = 0.5 + uni(rng);
    const double drift_phase = kTwoPi * uni(rng);
    const double syllable_rate = 2.5 + 2.0 * uni(rng);
    const double t_total = static_cast<double>(n) / fs;

    std::vector<double> out(n, 0.0);
    double phase = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double time = static_cast<double>(t) / fs;
        const double f0 = 175.0 + 75.0 * std::sin(kTwoPi * drift_rate * time + drift_phase);
        phase += kTwoPi * f0 / fs;
        double voiced = 0.0;
        for (int k = 1; k * f0 < 4000.0; ++k) {
            const double formant = 1.0 + 1.5 * std::exp(-std::pow((k * f0 - 700.0) / 300.0, 2.0)) +
                                   std::exp(-std::pow((k * f0 - 1800.0) / 400.0, 2.0));
            voiced += formant * std::sin(k * phase) / k;
        }
        const double onset = time < 0.2 ? std::pow(std::sin(0.5 * std::numbers::pi * time / 0.2), 2.0) : 1.0;
        const double tail = t_total - time;
        const double offset = tail < 0.05 ? tail / 0.05 : 1.0;
        const double syllable = 0.55 + 0.45 * std::abs(std::sin(std::numbers::pi * syllable_rate * time));
        out[t] = voiced * onset * offset * syllable;
    }

    // Noise bursts after the onset ramp, high-passed by first differencing.
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t burst = static_cast<std::size_t>(0.04 * fs);
    const double voiced_rms = rms(out);
    for (int b = 0; b < 3; ++b) {
        const double start_s = 0.25 + (t_total - 0.35) * (b + uni(rng)) / 3.0;
        const auto start = static_cast<std::size_t>(std::max(0.0, start_s) * fs);
        double prev = 0.0;
        for (std::size_t t = start; t < std::min(n, start + burst); ++t) {
            const double w = std::sin(std::numbers::pi * static_cast<double>(t - start) / static_cast<double>(burst));
            const double g = gauss(rng);
            out[t] += 0.6 * voiced_rms * w * (g - prev);
            prev = g;
        }
    }
    return out;
}

std::vector<double> chirp(std::size_t n, int fs) {
    const double f0 = 1000.0;
    const double f1 = 7000.0;
    const double T = static_cast<double>(n) / fs;
    const double taper = std::min(0.005, 0.25 * T);
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double time = static_cast<double>(t) / fs;
        double w = 1.0;
        if (time < taper) w = std::sin(0.5 * std::numbers::pi * time / taper);
        if (T - time < taper) w = std::sin(0.5 * std::numbers::pi * (T - time) / taper);
        out[t] = w * std::sin(kTwoPi * (f0 * time + 0.5 * (f1 - f0) / T * time * time));
    }
    return out;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

// Axis image: coordinate and bounce count for image index n and parity p.
struct AxisImage {
    double coord;
    int bounces;
};

std::vector<AxisImage> axis_images(double c, double extent, int order) {
    std::vector<AxisImage> out;
    for (int n = -order; n <= order; ++n)
        for (int p = 0; p <= 1; ++p) {
            const int bounces = std::abs(2 * n - p);
            if (bounces <= order) out.push_back({(1 - 2 * p) * c + 2.0 * n * extent, bounces});
        }
    return out;
}

double power_of(std::span<const double> x) { return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size()); }

}  // namespace

Signal make_source(SourceKind kind, double duration, int sample_rate, std::uint64_t seed) {
    if (!(duration > 0.0)) throw InvalidInput("make_source: duration must be positive");
    if (sample_rate <= 0) throw InvalidInput("make_source: sample rate must be positive");
    const auto n = static_cast<std::size_t>(std::lround(duration * sample_rate));
    auto rng = substream(seed, 0, 0, 0x736f75726365ULL);
    std::vector<double> x;
    switch (kind) {
        case SourceKind::gaussian: x = gaussian_noise(n, rng); break;
        case SourceKind::speech_like: x = speech_like(n, sample_rate, rng); break;
        case SourceKind::chirp: x = chirp(n, sample_rate); break;
    }
    normalize_rms(x);
    return {std::move(x), sample_rate};
}

ImpulseResponse synth_channel(const Room& room, int sample_rate, const Emitter& emitter, Vec2 receiver,
                              int reflection_order) {
    if (reflection_order < 0 || reflection_order > 3) throw InvalidInput("synth_channel: reflection order must lie in [0, 3]");
    if (sample_rate <= 0) throw InvalidInput("synth_channel: sample rate must be positive");

    struct Path {
        double delay;
        double amplitude;
    };
    std::vector<Path> paths;
    const double reflect = 1.0 - room.absorption;
    for (const auto& ix : axis_images(receiver.x, room.width, reflection_order))
        for (const auto& iy : axis_images(receiver.y, room.depth, reflection_order)) {
            const int bounces = ix.bounces + iy.bounces;
            if (bounces > reflection_order) continue;
            const double loss = bounces == 0 ? 1.0 : std::pow(reflect, bounces);
            if (loss == 0.0) continue;
            // Mirroring the receiver keeps the departure direction at the real source.
            const Vec2 image{ix.coord, iy.coord};
            const double length = distance(emitter.position, image);
            const double gain = emitter.pattern
                                    ? pattern_gain(*emitter.pattern, bearing(emitter.position, image) - emitter.facing)
                                    : 1.0;
            paths.push_back({length / kSpeedOfSound * sample_rate, gain * loss / std::max(length, kMinDistance)});
        }

    double max_delay = 0.0;
    for (const auto& p : paths) max_delay = std::max(max_delay, p.delay);
    const auto len = static_cast<std::size_t>(std::ceil(max_delay)) + dsp::kSincHalfWidth + 2;
    std::vector<double> taps(len, 0.0);
    for (const auto& p : paths) {
        const long base = static_cast<long>(std::floor(p.delay));
        for (long k = base - dsp::kSincHalfWidth; k <= base + dsp::kSincHalfWidth + 1; ++k) {
            if (k < 0 || k >= static_cast<long>(len)) continue;
            taps[static_cast<std::size_t>(k)] += p.amplitude * dsp::sinc_kernel(static_cast<double>(k) - p.delay);
        }
    }
    return {std::move(taps), sample_rate};
}

ImpulseResponse synth_channel(const Scene& scene, std::size_t device, std::size_t mic, int reflection_order) {
    if (device >= scene.devices.size()) throw InvalidInput("synth_channel: device index out of range");
    const auto& d = scene.devices[device];
    if (mic >= static_cast<std::size_t>(d.mic_count)) throw InvalidInput("synth_channel: mic index out of range");
    const Emitter user{scene.user.position, scene.user.facing, &pattern_by_name(scene.pattern)};
    return synth_channel(scene.room, scene.sample_rate, user, mic_positions(d)[mic], reflection_order);
}

double measure_snr_tilde(std::span<const double> x, std::size_t onset, std::size_t voiced, int sample_rate) {
    const std::size_t window = std::min(onset, static_cast<std::size_t>(0.1 * sample_rate));
    const std::size_t end = std::min(x.size(), onset + voiced);
    if (onset >= end) throw InvalidInput("measure_snr_tilde: empty voiced segment");
    const double noise = power_of(x.subspan(onset - window, window));
    const double mixture = power_of(x.subspan(onset, end - onset));
    if (noise <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(mixture / noise);
}

Recording record(const Scene& scene, const RecordOptions& options) {
    validate(scene);
    const int order = options.reflection_order.value_or(scene.room.reflection_order);
    const int fs = scene.sample_rate;

    Recording rec;
    auto& truth = rec.truth;
    truth.source = make_source(scene.source, scene.duration, fs, scene.seed);
    const double loudness = std::pow(10.0, scene.user.loudness_db / 20.0);
    for (auto& v : truth.source.samples) v *= loudness;
    truth.onset = static_cast<std::size_t>(std::lround(scene.lead_in * fs));

    const auto& pattern = pattern_by_name(scene.pattern);
    const std::size_t n_dev = scene.devices.size();
    truth.channels.resize(n_dev);
    std::size_t max_channel = 1;
    for (std::size_t i = 0; i < n_dev; ++i) {
        const auto& d = scene.devices[i];
        for (int j = 0; j < d.mic_count; ++j) {
            truth.channels[i].push_back(synth_channel(scene, i, static_cast<std::size_t>(j), order));
            max_channel = std::max(max_channel, truth.channels[i].back().size());
        }
        const double dist = distance(d.position, scene.user.position);
        truth.distances.push_back(dist);
        truth.aoas.push_back(wrap_2pi(bearing(d.position, scene.user.position) - d.orientation));
        truth.los_amplitudes.push_back(pattern_gain(pattern, bearing(scene.user.position, d.position) - scene.user.facing) /
                                       std::max(dist, kMinDistance));
    }

    const std::size_t voiced = truth.source.size();
    const std::size_t total = truth.onset + voiced + max_channel - 1;
    double clean_power = 0.0;
    std::size_t mic_total = 0;
    rec.observations.resize(n_dev);
    for (std::size_t i = 0; i < n_dev; ++i)
        for (const auto& h : truth.channels[i]) {
            auto wet = dsp::convolve(truth.source.samples, h.taps);
            std::vector<double> x(total, 0.0);
            std::copy(wet.begin(), wet.end(), x.begin() + static_cast<long>(truth.onset));
            clean_power += power_of(std::span<const double>(x).subspan(truth.onset, voiced));
            ++mic_total;
            rec.observations[i].push_back({std::move(x), fs});
        }
    clean_power /= static_cast<double>(mic_total);

    truth.noise_floor_db = scene.noise_floor_db;
    if (options.snr_tilde_db) {
        const double ratio = std::pow(10.0, *options.snr_tilde_db / 10.0) - 1.0;
        if (!(ratio > 0.0)) throw InvalidInput("record: SNR~ target must be above 0 dB");
        truth.noise_floor_db = 10.0 * std::log10(clean_power / ratio);
    }

    double snr_ratio = 0.0;
    if (std::isfinite(truth.noise_floor_db)) {
        const double sigma = std::pow(10.0, truth.noise_floor_db / 20.0);
        for (std::size_t i = 0; i < n_dev; ++i)
            for (std::size_t j = 0; j < rec.observations[i].size(); ++j) {
                auto rng = substream(scene.seed, i, j, 0x6e6f697365ULL);
                std::normal_distribution<double> dist(0.0, sigma);
                for (auto& v : rec.observations[i][j].samples) v += dist(rng);
                snr_ratio += std::pow(10.0, measure_snr_tilde(rec.observations[i][j].samples, truth.onset, voiced, fs) / 10.0);
            }
        truth.snr_tilde_db = 10.0 * std::log10(snr_ratio / static_cast<double>(mic_total));
    } else {
        truth.snr_tilde_db = std::numeric_limits<double>::infinity();
    }
    return rec;
}

std::vector<Signal> record_emission(const Scene& scene, std::size_t emitter, std::size_t receiver, const Signal& sound) {
    if (emitter >= scene.devices.size() || receiver >= scene.devices.size())
        throw InvalidInput("record_emission: device index out of range");
    const Emitter speaker{scene.devices[emitter].position, 0.0, nullptr};
    const auto mics = mic_positions(scene.devices[receiver]);
    std::vector<Signal> out;
    for (std::size_t j = 0; j < mics.size(); ++j) {
        const auto h = synth_channel(scene.room, scene.sample_rate, speaker, mics[j], scene.room.reflection_order);
        Signal x{dsp::convolve(sound.samples, h.taps), scene.sample_rate};
        if (std::isfinite(scene.noise_floor_db)) {
            auto rng = substream(scene.seed, emitter * 1000 + receiver, j, 0x63686972ULL);
            std::normal_distribution<double> dist(0.0, std::pow(10.0, scene.noise_floor_db / 20.0));
            for (auto& v : x.samples) v += dist(rng);
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace facing::sim
