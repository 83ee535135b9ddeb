#include <doctest.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "facing_cli/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome facing_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "facing");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = facing::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("facing_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const std::string kTwoDevices = R"(sample_rate: 16000
seed: 3
source: {kind: gaussian, duration: 0.5}
noise_floor_db: -40
pattern: cardioid
room: {width: 4, depth: 4, absorption: 0.5, reflection_order: 0}
user: {x: 2.0, y: 2.0, facing: 0.0}
devices:
  - {x: 3.5, y: 2.2, orientation: 0.0}
  - {x: 0.6, y: 1.5, orientation: 1.0}
)";

std::string config_path(const char* name) { return (fs::path(FACING_SOURCE_DIR) / "configs" / name).string(); }

}  // namespace

TEST_CASE("simulate writes every mic file, truth and a manifest") {
    const auto dir = scratch("sim");
    spit(dir / "two.yaml", kTwoDevices);
    const auto r = facing_cli({"simulate", (dir / "two.yaml").string(), "-o", (dir / "out").string()});
    REQUIRE(r.code == 0);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 6; ++j) CHECK(fs::is_regular_file(dir / "out" / ("dev" + std::to_string(i) + "_mic" + std::to_string(j) + ".wav")));
    CHECK(fs::is_regular_file(dir / "out" / "truth.json"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest["subcommand"] == "simulate");
    CHECK(manifest.contains("version"));
    CHECK(manifest.contains("seed"));
    CHECK(manifest.contains("parameters"));

    const auto again = facing_cli({"simulate", (dir / "two.yaml").string(), "-o", (dir / "again").string()});
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "out" / "truth.json") == slurp(dir / "again" / "truth.json"));
    CHECK(slurp(dir / "out" / "dev1_mic4.wav") == slurp(dir / "again" / "dev1_mic4.wav"));
}

TEST_CASE("simulate rejects an out-of-room device by field name") {
    const auto dir = scratch("bad");
    std::string text = kTwoDevices;
    text.replace(text.find("x: 0.6"), 6, "x: 9.6");
    spit(dir / "bad.yaml", text);
    const auto r = facing_cli({"simulate", (dir / "bad.yaml").string(), "-o", (dir / "out").string()});
    CHECK(r.code == facing::cli::kExitUsage);
    CHECK(r.err.find("devices[1]") != std::string::npos);
}

TEST_CASE("simulate then infer recovers the faced device") {
    const auto dir = scratch("infer");
    const auto cfg = config_path("anechoic_4dev.yaml");
    REQUIRE(facing_cli({"simulate", cfg, "-o", (dir / "obs").string()}).code == 0);
    const auto r = facing_cli({"infer", (dir / "obs").string(), "-l", cfg, "--json", "-o", (dir / "dec").string()});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report["device_index"] == 2);
    CHECK(fs::is_regular_file(dir / "dec" / "decision.json"));
    CHECK(fs::is_regular_file(dir / "dec" / "manifest.json"));

    const auto schema = nlohmann::json::parse(slurp(fs::path(FACING_SOURCE_DIR) / "docs" / "infer-report.schema.json"));
    for (const auto& key : schema["required"]) CHECK(report.contains(key.get<std::string>()));
    const auto& item = schema["properties"]["devices"]["items"]["required"];
    REQUIRE(report["devices"].size() == 4);
    for (const auto& d : report["devices"])
        for (const auto& key : item) CHECK(d.contains(key.get<std::string>()));
    CHECK(report.size() == schema["properties"].size());

    const auto text = facing_cli({"infer", (dir / "obs").string(), "-l", cfg});
    CHECK(text.code == 0);
    CHECK(text.out.find("facing device: 2") != std::string::npos);

    const auto aoa = facing_cli({"aoa", (dir / "obs").string(), "-l", cfg, "--json"});
    CHECK(aoa.code == 0);
    CHECK(nlohmann::json::parse(aoa.out)["estimates"].size() == 4);
}

TEST_CASE("infer lists every missing mic file") {
    const auto dir = scratch("missing");
    const auto cfg = config_path("anechoic_4dev.yaml");
    REQUIRE(facing_cli({"simulate", cfg, "-o", dir.string()}).code == 0);
    fs::remove(dir / "dev1_mic2.wav");
    fs::remove(dir / "dev3_mic0.wav");
    const auto r = facing_cli({"infer", dir.string(), "-l", cfg});
    CHECK(r.code == facing::cli::kExitRuntime);
    CHECK(r.err.find("dev1_mic2.wav") != std::string::npos);
    CHECK(r.err.find("dev3_mic0.wav") != std::string::npos);
}

TEST_CASE("infer names a truncated file") {
    const auto dir = scratch("truncated");
    const auto cfg = config_path("anechoic_4dev.yaml");
    REQUIRE(facing_cli({"simulate", cfg, "-o", dir.string()}).code == 0);
    const auto victim = dir / "dev2_mic3.wav";
    const auto bytes = slurp(victim);
    spit(victim, bytes.substr(0, bytes.size() / 2));
    const auto r = facing_cli({"infer", dir.string(), "-l", cfg});
    CHECK(r.code == facing::cli::kExitRuntime);
    CHECK(r.err.find("dev2_mic3.wav") != std::string::npos);
    CHECK(r.err.find("truncated") != std::string::npos);
}

TEST_CASE("converge writes the documented CSV header") {
    const auto dir = scratch("converge");
    const auto r = facing_cli({"converge", "-o", dir.string(), "--seeds", "2", "--iterations", "3", "--sources", "gaussian", "-j", "1"});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "converge.csv");
    CHECK(csv.rfind("snr_db,source,iteration,correlation,median_correlation\n", 0) == 0);
    CHECK(fs::is_regular_file(dir / "manifest.json"));
}

TEST_CASE("p2p recovers a noiseless layout") {
    const auto dir = scratch("p2p");
    const auto r = facing_cli({"p2p", config_path("anechoic_4dev.yaml"), "-o", dir.string()});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["residual_rms_rad"].get<double>() < 1e-6);
    CHECK(report["rms_error_m"].get<double>() < 1e-6);
    CHECK(fs::is_regular_file(dir / "layout.yaml"));
    CHECK(fs::is_regular_file(dir / "manifest.json"));
}

TEST_CASE("eval smoke run") {
    const auto dir = scratch("eval");
    const auto start = std::chrono::steady_clock::now();
    const auto r = facing_cli({"eval", "-o", dir.string(), "--devices", "4", "--trials", "20", "--duration", "0.5", "-j", "2"});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(r.code == 0);
    CHECK(seconds < 60.0);
    const auto csv = slurp(dir / "trials.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.contains("groups"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["subcommand"] == "eval");
}

TEST_CASE("exit codes") {
    CHECK(facing_cli({}).code == facing::cli::kExitUsage);
    CHECK(facing_cli({"frobnicate"}).code == facing::cli::kExitUsage);
    CHECK(facing_cli({"eval"}).code == facing::cli::kExitUsage);
    CHECK(facing_cli({"eval", "-o", scratch("bad_eval").string(), "--devices", "1"}).code == facing::cli::kExitUsage);
    CHECK(facing_cli({"simulate", "/nonexistent/scene.yaml", "-o", scratch("nofile").string()}).code == facing::cli::kExitUsage);
    CHECK(facing_cli({"--help"}).code == facing::cli::kExitOk);
    CHECK(facing_cli({"--version"}).code == facing::cli::kExitOk);

    const auto dir = scratch("empty_obs");
    CHECK(facing_cli({"infer", dir.string(), "-l", config_path("anechoic_4dev.yaml")}).code == facing::cli::kExitRuntime);
}
