#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facing/scene.hpp"

namespace facing::config {

/// Shortest decimal text that parses back to exactly `v`; infinities as YAML `.inf` / `-.inf`.
[[nodiscard]] std::string format_number(double v);

/// Parses and validates a scene document. Unknown keys are rejected; errors carry the line number.
[[nodiscard]] Scene parse_scene(std::string_view text);
[[nodiscard]] Scene load_scene(const std::filesystem::path& path);

/// Canonical text form; parse_scene(serialize_scene(s)) reproduces s bit for bit.
[[nodiscard]] std::string serialize_scene(const Scene& s);

/// Device list plus optional metadata, as written for layouts.
struct DevicesDocument {
    std::vector<DevicePose> devices;
    std::string gauge;
    std::optional<double> residual_rms;
};

/// Accepts a full scene document or a layout document (`devices`, `gauge`, `residual_rms`).
[[nodiscard]] DevicesDocument parse_devices(std::string_view text);
[[nodiscard]] DevicesDocument load_devices(const std::filesystem::path& path);
[[nodiscard]] std::string serialize_devices(const DevicesDocument& doc);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace facing::config
