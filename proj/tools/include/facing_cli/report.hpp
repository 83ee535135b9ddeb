#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "facing/direction.hpp"
#include "facing/scene.hpp"
#include "facing/simulate.hpp"

namespace facing::cli {

/// Observation file for mic `mic` of device `device`.
[[nodiscard]] std::filesystem::path observation_path(const std::filesystem::path& dir, std::size_t device,
                                                     std::size_t mic);

/// Loads every dev{i}_mic{j}.wav for the given devices. Missing files are listed together.
[[nodiscard]] std::vector<std::vector<Signal>> load_observations(const std::filesystem::path& dir,
                                                                 std::span<const DevicePose> devices);

/// Device the user faces most directly (smallest angle between facing and bearing).
[[nodiscard]] std::size_t faced_device(const Scene& scene);

/// Degrees rounded to 1e-6, hiding round-off on grid-valued angles.
[[nodiscard]] double report_deg(double rad);

[[nodiscard]] nlohmann::json truth_json(const Scene& scene, const sim::GroundTruth& truth);
[[nodiscard]] nlohmann::json decision_json(const direction::FacingDecision& d);
[[nodiscard]] std::string decision_text(const direction::FacingDecision& d);

struct Manifest {
    std::string subcommand;
    std::string config;  // empty when the run had no config file
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<std::string> outputs;
};

/// Writes manifest.json into the manifest's output directory.
void write_manifest(const Manifest& m);

}  // namespace facing::cli
