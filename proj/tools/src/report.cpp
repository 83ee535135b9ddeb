#include "facing_cli/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "facing/config.hpp"
#include "facing/error.hpp"
#include "facing_cli/wav.hpp"

#ifndef FACING_VERSION
#define FACING_VERSION "0.0.0"
#endif

namespace facing::cli {
namespace {

nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    return config::format_number(v);
}

nlohmann::json point(Vec2 p) { return {{"x", p.x}, {"y", p.y}}; }

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::filesystem::path observation_path(const std::filesystem::path& dir, std::size_t device, std::size_t mic) {
    return dir / ("dev" + std::to_string(device) + "_mic" + std::to_string(mic) + ".wav");
}

std::vector<std::vector<Signal>> load_observations(const std::filesystem::path& dir, std::span<const DevicePose> devices) {
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < devices.size(); ++i)
        for (int j = 0; j < devices[i].mic_count; ++j)
            if (const auto p = observation_path(dir, i, static_cast<std::size_t>(j)); !std::filesystem::is_regular_file(p)) missing.push_back(p.string());
    if (!missing.empty()) {
        std::string msg = "missing observation files (" + std::to_string(missing.size()) + "):";
        for (const auto& m : missing) msg += "\n  " + m;
        throw InvalidInput(msg);
    }
    std::vector<std::vector<Signal>> out(devices.size());
    for (std::size_t i = 0; i < devices.size(); ++i)
        for (int j = 0; j < devices[i].mic_count; ++j) {
            const auto p = observation_path(dir, i, static_cast<std::size_t>(j));
            auto s = read_wav(p);
            if (!out.empty() && !out.front().empty()) {
                const auto& ref = out.front().front();
                if (s.sample_rate != ref.sample_rate)
                    throw InvalidInput(p.string() + ": sample rate " + std::to_string(s.sample_rate) + " differs from " +
                                       std::to_string(ref.sample_rate));
                if (s.size() != ref.size())
                    throw InvalidInput(p.string() + ": " + std::to_string(s.size()) + " samples, expected " +
                                       std::to_string(ref.size()));
            }
            out[i].push_back(std::move(s));
        }
    return out;
}

double report_deg(double rad) { return std::round(rad2deg(rad) * 1e6) / 1e6; }

std::size_t faced_device(const Scene& scene) {
    std::size_t best = 0;
    double best_angle = 10.0;
    for (std::size_t i = 0; i < scene.devices.size(); ++i) {
        const double a = std::abs(wrap_pi(bearing(scene.user.position, scene.devices[i].position) - scene.user.facing));
        if (a < best_angle) {
            best_angle = a;
            best = i;
        }
    }
    return best;
}

nlohmann::json truth_json(const Scene& scene, const sim::GroundTruth& truth) {
    nlohmann::json devices = nlohmann::json::array();
    for (std::size_t i = 0; i < scene.devices.size(); ++i)
        devices.push_back({{"index", i},
                           {"aoa_deg", rad2deg(truth.aoas[i])},
                           {"distance_m", truth.distances[i]},
                           {"los_amplitude", truth.los_amplitudes[i]}});
    return {{"faced_device", faced_device(scene)},
            {"user", {{"position", point(scene.user.position)}, {"facing_deg", rad2deg(scene.user.facing)}}},
            {"sample_rate", scene.sample_rate},
            {"onset_sample", truth.onset},
            {"noise_floor_db", number(truth.noise_floor_db)},
            {"snr_tilde_db", number(truth.snr_tilde_db)},
            {"devices", devices}};
}

nlohmann::json decision_json(const direction::FacingDecision& d) {
    nlohmann::json devices = nlohmann::json::array();
    for (std::size_t i = 0; i < d.aoas.size(); ++i)
        devices.push_back({{"index", i},
                           {"aoa_deg", report_deg(d.aoas[i])},
                           {"distance_m", d.distances[i]},
                           {"los_power", d.los_powers[i]},
                           {"equalized_power", d.equalized_powers[i]},
                           {"correlation", d.correlations[i]}});
    return {{"schema_version", 1},
            {"device_index", d.device_index},
            {"user_location", point(d.user_location)},
            {"cluster_size", d.cluster_size},
            {"iterations_used", d.trace.iterations_used},
            {"converged", d.trace.converged},
            {"diverged", d.trace.diverged},
            {"devices", devices}};
}

std::string decision_text(const direction::FacingDecision& d) {
    std::ostringstream out;
    out << "facing device: " << d.device_index << '\n';
    out << "user location: " << fixed(d.user_location.x, 3) << ' ' << fixed(d.user_location.y, 3) << " m (cluster of "
        << d.cluster_size << ")\n";
    out << "iterations: " << d.trace.iterations_used
        << (d.trace.converged ? " (converged)" : d.trace.diverged ? " (diverged, best kept)" : " (limit reached)") << '\n';
    out << "device  aoa_deg  distance_m  los_power  equalized  correlation\n";
    for (std::size_t i = 0; i < d.aoas.size(); ++i) {
        char line[160];
        std::snprintf(line, sizeof line, "%6zu  %7.1f  %10.3f  %9.4g  %9.4g  %11.4f\n", i, rad2deg(d.aoas[i]), d.distances[i],
                      d.los_powers[i], d.equalized_powers[i], d.correlations[i]);
        out << line;
    }
    return out.str();
}

void write_manifest(const Manifest& m) {
    nlohmann::json doc{{"tool", "facing"},
                       {"version", FACING_VERSION},
                       {"subcommand", m.subcommand},
                       {"config", m.config.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.config)},
                       {"output_dir", m.output_dir.string()},
                       {"seed", m.seed},
                       {"parameters", m.parameters},
                       {"outputs", m.outputs}};
    config::write_text(m.output_dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace facing::cli
