#include "facing/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include "facing/error.hpp"

namespace facing::config {
namespace {

int line_of(const YAML::Node& n) {
    const auto mark = n.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
}

void require_map(const YAML::Node& n, const std::string& field) {
    if (!n.IsMap()) throw ConfigError(field + ": expected a mapping", line_of(n));
}

void reject_unknown(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const std::string& prefix) {
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + prefix + key + "'", line_of(kv.first));
    }
}

template <typename T>
T scalar(const YAML::Node& map, const char* key, const std::string& prefix) {
    const auto node = map[key];
    if (!node) throw ConfigError("missing required key '" + prefix + key + "'", line_of(map));
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("invalid value for '" + prefix + key + "'", line_of(node));
    }
}

template <typename T>
T scalar_or(const YAML::Node& map, const char* key, const std::string& prefix, T fallback) {
    return map[key] ? scalar<T>(map, key, prefix) : fallback;
}

DevicePose parse_device(const YAML::Node& n, std::size_t index) {
    const std::string prefix = "devices[" + std::to_string(index) + "].";
    require_map(n, prefix.substr(0, prefix.size() - 1));
    reject_unknown(n, {"x", "y", "orientation", "mics", "radius"}, prefix);
    DevicePose d;
    d.position = {scalar<double>(n, "x", prefix), scalar<double>(n, "y", prefix)};
    d.orientation = scalar_or<double>(n, "orientation", prefix, 0.0);
    d.mic_count = scalar_or<int>(n, "mics", prefix, kDefaultMicCount);
    d.array_radius = scalar_or<double>(n, "radius", prefix, kDefaultArrayRadius);
    if (d.mic_count < 4) throw ConfigError(prefix + "mics: at least 4 microphones required", line_of(n));
    if (!(d.array_radius > 0.0)) throw ConfigError(prefix + "radius: must be positive", line_of(n));
    return d;
}

std::vector<DevicePose> parse_device_list(const YAML::Node& root) {
    const auto list = root["devices"];
    if (!list) throw ConfigError("missing required key 'devices'", line_of(root));
    if (!list.IsSequence()) throw ConfigError("devices: expected a list", line_of(list));
    std::vector<DevicePose> out;
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(parse_device(list[i], i));
    return out;
}

YAML::Node load_root(std::string_view text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1);
    }
    if (!root.IsMap()) throw ConfigError("document must be a mapping", 1);
    return root;
}

void emit_device(std::ostringstream& out, const DevicePose& d) {
    out << "  - {x: " << format_number(d.position.x) << ", y: " << format_number(d.position.y)
        << ", orientation: " << format_number(d.orientation) << ", mics: " << d.mic_count
        << ", radius: " << format_number(d.array_radius) << "}\n";
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return ".nan";
    if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

Scene parse_scene(std::string_view text) {
    const auto root = load_root(text);
    reject_unknown(root, {"sample_rate", "seed", "source", "noise_floor_db", "pattern", "room", "user", "devices"}, "");

    Scene s;
    s.sample_rate = scalar_or<int>(root, "sample_rate", "", kDefaultSampleRate);
    s.seed = scalar_or<std::uint64_t>(root, "seed", "", 1);
    s.noise_floor_db = scalar_or<double>(root, "noise_floor_db", "", -std::numeric_limits<double>::infinity());
    s.pattern = scalar_or<std::string>(root, "pattern", "", "cardioid");

    if (const auto src = root["source"]) {
        require_map(src, "source");
        reject_unknown(src, {"kind", "duration", "lead_in"}, "source.");
        const auto kind = scalar_or<std::string>(src, "kind", "source.", "gaussian");
        try {
            s.source = parse_source_kind(kind);
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("source.kind: ") + e.what(), line_of(src["kind"]));
        }
        s.duration = scalar_or<double>(src, "duration", "source.", s.duration);
        s.lead_in = scalar_or<double>(src, "lead_in", "source.", s.lead_in);
    }

    const auto room = root["room"];
    if (!room) throw ConfigError("missing required key 'room'", line_of(root));
    require_map(room, "room");
    reject_unknown(room, {"width", "depth", "absorption", "reflection_order"}, "room.");
    s.room.width = scalar<double>(room, "width", "room.");
    s.room.depth = scalar<double>(room, "depth", "room.");
    s.room.absorption = scalar_or<double>(room, "absorption", "room.", s.room.absorption);
    s.room.reflection_order = scalar_or<int>(room, "reflection_order", "room.", s.room.reflection_order);

    const auto user = root["user"];
    if (!user) throw ConfigError("missing required key 'user'", line_of(root));
    require_map(user, "user");
    reject_unknown(user, {"x", "y", "facing", "loudness_db"}, "user.");
    s.user.position = {scalar<double>(user, "x", "user."), scalar<double>(user, "y", "user.")};
    s.user.facing = scalar_or<double>(user, "facing", "user.", 0.0);
    s.user.loudness_db = scalar_or<double>(user, "loudness_db", "user.", 0.0);

    s.devices = parse_device_list(root);

    try {
        validate(s);
    } catch (const ConfigError& e) {
        // Anchor device errors to the device entry when we can.
        const std::string& what = e.message();
        if (what.rfind("devices[", 0) == 0) {
            const auto close = what.find(']');
            const auto idx = std::stoul(what.substr(8, close - 8));
            throw ConfigError(what, line_of(root["devices"][idx]));
        }
        if (what.rfind("user", 0) == 0) throw ConfigError(what, line_of(user));
        if (what.rfind("room", 0) == 0) throw ConfigError(what, line_of(room));
        throw;
    }
    return s;
}

std::string serialize_scene(const Scene& s) {
    std::ostringstream out;
    out << "# facing-direction scene v1 (lengths in m, angles in rad, levels in dB)\n";
    out << "sample_rate: " << s.sample_rate << "\n";
    out << "seed: " << s.seed << "\n";
    out << "source:\n";
    out << "  kind: " << to_string(s.source) << "\n";
    out << "  duration: " << format_number(s.duration) << "\n";
    out << "  lead_in: " << format_number(s.lead_in) << "\n";
    out << "noise_floor_db: " << format_number(s.noise_floor_db) << "\n";
    out << "pattern: " << s.pattern << "\n";
    out << "room:\n";
    out << "  width: " << format_number(s.room.width) << "\n";
    out << "  depth: " << format_number(s.room.depth) << "\n";
    out << "  absorption: " << format_number(s.room.absorption) << "\n";
    out << "  reflection_order: " << s.room.reflection_order << "\n";
    out << "user:\n";
    out << "  x: " << format_number(s.user.position.x) << "\n";
    out << "  y: " << format_number(s.user.position.y) << "\n";
    out << "  facing: " << format_number(s.user.facing) << "\n";
    out << "  loudness_db: " << format_number(s.user.loudness_db) << "\n";
    out << "devices:\n";
    for (const auto& d : s.devices) emit_device(out, d);
    return out.str();
}

DevicesDocument parse_devices(std::string_view text) {
    const auto root = load_root(text);
    if (root["room"]) return {parse_scene(text).devices, "scene", std::nullopt};
    reject_unknown(root, {"devices", "gauge", "residual_rms"}, "");
    DevicesDocument doc;
    doc.devices = parse_device_list(root);
    doc.gauge = scalar_or<std::string>(root, "gauge", "", "");
    if (root["residual_rms"]) doc.residual_rms = scalar<double>(root, "residual_rms", "");
    if (doc.devices.empty()) throw ConfigError("devices: list is empty", line_of(root));
    return doc;
}

std::string serialize_devices(const DevicesDocument& doc) {
    std::ostringstream out;
    out << "# facing-direction layout v1 (lengths in m, angles in rad)\n";
    if (!doc.gauge.empty()) out << "gauge: \"" << doc.gauge << "\"\n";
    if (doc.residual_rms) out << "residual_rms: " << format_number(*doc.residual_rms) << "\n";
    out << "devices:\n";
    for (const auto& d : doc.devices) emit_device(out, d);
    return out.str();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

Scene load_scene(const std::filesystem::path& path) {
    try {
        return parse_scene(read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(e.message(), e.line(), path.string());
    }
}

DevicesDocument load_devices(const std::filesystem::path& path) {
    try {
        return parse_devices(read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(e.message(), e.line(), path.string());
    }
}

}  // namespace facing::config
