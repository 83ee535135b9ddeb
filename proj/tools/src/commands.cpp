#include "facing_cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "facing/aoa.hpp"
#include "facing/config.hpp"
#include "facing/direction.hpp"
#include "facing/dsp.hpp"
#include "facing/error.hpp"
#include "facing/evalkit.hpp"
#include "facing/locate.hpp"
#include "facing/simulate.hpp"
#include "facing_cli/report.hpp"
#include "facing_cli/wav.hpp"

namespace fs = std::filesystem;

namespace facing::cli {
namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> pattern_names() {
    std::vector<std::string> names;
    for (const auto& p : builtin_patterns()) names.push_back(p.name);
    return names;
}

void add_channel_flags(CLI::App& cmd, direction::ChannelOptions& c) {
    cmd.add_option("--threshold", c.threshold, "Convergence threshold on the relative source change")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--max-iterations", c.max_iterations, "Iteration cap for channel estimation")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    cmd.add_option("--reg", c.reg, "Deconvolution regularisation, relative to the peak reference power")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--guard", c.guard_seconds, "Lag (s) at which the earliest channel peak is held")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
}

void add_infer_flags(CLI::App& cmd, direction::InferParams& p) {
    add_channel_flags(cmd, p.channels);
    cmd.add_option("--peak-fraction", p.los.peak_fraction, "First-peak threshold as a fraction of the channel maximum")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--los-window", p.los.window_seconds, "First-peak search span (s) before the strongest tap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--gain-exponent", p.match.gain_exponent, "Exponent applied to pattern gains when matching")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--eps", p.triangulation.eps, "DBSCAN radius (m) for ray intersections")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--min-points", p.triangulation.min_points, "DBSCAN core-point size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

nlohmann::json infer_parameters(const direction::InferParams& p) {
    return {{"threshold", p.channels.threshold},
            {"max_iterations", p.channels.max_iterations},
            {"reg", p.channels.reg},
            {"guard_s", p.channels.guard_seconds},
            {"peak_fraction", p.los.peak_fraction},
            {"los_window_s", p.los.window_seconds},
            {"gain_exponent", p.match.gain_exponent},
            {"eps", p.triangulation.eps},
            {"min_points", p.triangulation.min_points}};
}

void prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string join_numbers(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + config::format_number(x);
    return s;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> snr;
    std::optional<int> reflection_order;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    auto scene = config::load_scene(a.config);
    if (a.seed) scene.seed = *a.seed;
    sim::RecordOptions opts;
    opts.snr_tilde_db = a.snr;
    if (a.reflection_order) {
        if (*a.reflection_order < 0) throw UsageError("--reflection-order must be non-negative");
        opts.reflection_order = a.reflection_order;
    }
    const auto rec = sim::record(scene, opts);

    const fs::path dir = a.out;
    prepare_output(dir);
    Manifest m{"simulate", a.config, dir, scene.seed, {}, {}};
    for (std::size_t i = 0; i < rec.observations.size(); ++i)
        for (std::size_t j = 0; j < rec.observations[i].size(); ++j) {
            const auto p = observation_path(dir, i, j);
            write_wav(p, rec.observations[i][j]);
            m.outputs.push_back(p.filename().string());
        }
    config::write_text(dir / "truth.json", truth_json(scene, rec.truth).dump(2) + "\n");
    config::write_text(dir / "scene.yaml", config::serialize_scene(scene));
    m.outputs.insert(m.outputs.end(), {"truth.json", "scene.yaml"});
    m.parameters = {{"snr_tilde_db", a.snr ? nlohmann::json(*a.snr) : nlohmann::json(nullptr)},
                    {"reflection_order", opts.reflection_order.value_or(scene.room.reflection_order)}};
    write_manifest(m);
    out << "wrote " << rec.observations.size() << " devices x " << scene.devices.front().mic_count << " mics to "
        << dir.string() << " (SNR~ " << brief(rec.truth.snr_tilde_db) << " dB)\n";
    return kExitOk;
}

// ---- infer / aoa ----------------------------------------------------------

struct InferArgs {
    std::string observations;
    std::string layout;
    std::string pattern = "cardioid";
    std::string out;
    bool json = false;
    direction::InferParams params;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
    const auto devices = config::load_devices(a.layout).devices;
    const auto obs = load_observations(a.observations, devices);
    const auto decision = direction::infer(obs, devices, pattern_by_name(a.pattern), a.params);
    const auto report = decision_json(decision);
    if (a.json) out << report.dump(2) << '\n';
    else out << decision_text(decision);
    if (!a.out.empty()) {
        const fs::path dir = a.out;
        prepare_output(dir);
        config::write_text(dir / "decision.json", report.dump(2) + "\n");
        auto params = infer_parameters(a.params);
        params["pattern"] = a.pattern;
        params["observations"] = a.observations;
        write_manifest({"infer", a.layout, dir, 0, params, {"decision.json"}});
    }
    return kExitOk;
}

struct AoaArgs {
    std::string observations;
    std::string layout;
    std::optional<std::size_t> device;
    std::string out;
    bool json = false;
};

int cmd_aoa(const AoaArgs& a, std::ostream& out) {
    const auto devices = config::load_devices(a.layout).devices;
    if (a.device && *a.device >= devices.size())
        throw UsageError("--device " + std::to_string(*a.device) + " out of range (" + std::to_string(devices.size()) +
                         " devices)");
    const auto obs = load_observations(a.observations, devices);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < devices.size(); ++i) {
        if (a.device && *a.device != i) continue;
        const auto est = aoa::estimate_aoa(obs[i], devices[i]);
        rows.push_back({{"device", i},
                        {"aoa_deg", report_deg(est.angle)},
                        {"confidence", est.confidence},
                        {"degenerate", est.degenerate}});
    }
    if (a.json) {
        out << nlohmann::json{{"estimates", rows}}.dump(2) << '\n';
    } else {
        out << "device  aoa_deg  confidence\n";
        for (const auto& r : rows) {
            char line[96];
            std::snprintf(line, sizeof line, "%6zu  %7.1f  %10.4f%s\n", r["device"].get<std::size_t>(),
                          r["aoa_deg"].get<double>(), r["confidence"].get<double>(),
                          r["degenerate"].get<bool>() ? "  degenerate" : "");
            out << line;
        }
    }
    if (!a.out.empty()) {
        const fs::path dir = a.out;
        prepare_output(dir);
        config::write_text(dir / "aoa.json", nlohmann::json{{"estimates", rows}}.dump(2) + "\n");
        write_manifest({"aoa", a.layout, dir, 0, {{"observations", a.observations}}, {"aoa.json"}});
    }
    return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string out;
    std::vector<std::size_t> devices{2, 4, 6};
    std::vector<double> snr{30.0};
    std::vector<std::string> patterns{"cardioid"};
    std::size_t trials = 20;
    std::string source = "gaussian";
    double duration = 1.0;
    Room room;
    double min_separation = 0.0;
    std::uint64_t seed = 1;
    unsigned jobs = 0;
    direction::InferParams params;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    eval::SuiteConfig suite;
    suite.rooms = {a.room};
    suite.device_counts = a.devices;
    suite.snr_grid = a.snr;
    suite.patterns = a.patterns;
    suite.trials_per_cell = a.trials;
    suite.seed = a.seed;
    suite.source = parse_source_kind(a.source);
    suite.duration = a.duration;
    suite.min_separation_deg = a.min_separation;
    suite.jobs = a.jobs;
    suite.params = a.params;
    for (auto n : a.devices)
        if (n < 2) throw UsageError("--devices entries must be at least 2");

    const auto result = eval::run_benchmark(suite);
    const fs::path dir = a.out;
    prepare_output(dir);
    config::write_text(dir / "trials.csv", eval::trials_csv(result.rows));
    config::write_text(dir / "timings.csv", eval::timings_csv(result.rows));
    config::write_text(dir / "summary.json", eval::summary_json(result.summary));

    auto params = infer_parameters(a.params);
    params["devices"] = a.devices;
    params["snr_db"] = join_numbers(a.snr);
    params["patterns"] = a.patterns;
    params["trials"] = a.trials;
    params["source"] = a.source;
    params["duration_s"] = a.duration;
    params["room"] = {{"width", a.room.width},
                      {"depth", a.room.depth},
                      {"absorption", a.room.absorption},
                      {"reflection_order", a.room.reflection_order}};
    params["min_separation_deg"] = a.min_separation;
    params["jobs"] = a.jobs;
    params["csv_schema_version"] = eval::kCsvSchemaVersion;
    write_manifest({"eval", "", dir, a.seed, params, {"trials.csv", "timings.csv", "summary.json"}});

    out << "devices  snr_db  pattern  trials  accuracy  median_fde  median_loc_m\n";
    for (const auto& s : result.summary) {
        char line[160];
        std::snprintf(line, sizeof line, "%7zu  %6s  %7s  %6zu  %8.3f  %10.1f  %12.3f\n", s.n_devices,
                      config::format_number(s.snr_target_db).c_str(), s.pattern.c_str(), s.trials, s.accuracy, s.median_fde,
                      s.median_loc_error);
        out << line;
    }
    return kExitOk;
}

// ---- converge -------------------------------------------------------------

struct ConvergeArgs {
    std::string out;
    std::vector<double> snr{30.0};
    std::vector<std::string> sources{"gaussian", "speech_like"};
    std::size_t seeds = 20;
    int iterations = 10;
    std::size_t devices = 4;
    Room room{5.0, 5.0, 0.5, 2};
    std::uint64_t seed = 1;
    unsigned jobs = 0;
    direction::ChannelOptions channels;
    double peak_fraction = 0.3;
};

int cmd_converge(const ConvergeArgs& a, std::ostream& out) {
    eval::ConvergeConfig c;
    c.snr_grid = a.snr;
    c.sources.clear();
    for (const auto& s : a.sources) c.sources.push_back(parse_source_kind(s));
    c.seeds = a.seeds;
    c.iterations = a.iterations;
    c.devices = a.devices;
    c.room = a.room;
    c.base_seed = a.seed;
    c.jobs = a.jobs;
    c.channels = a.channels;
    c.los.peak_fraction = a.peak_fraction;
    if (a.devices < 2) throw UsageError("--devices must be at least 2");

    const auto rows = eval::converge_study(c);
    const fs::path dir = a.out;
    prepare_output(dir);
    config::write_text(dir / "converge.csv", eval::converge_csv(rows));
    write_manifest({"converge",
                    "",
                    dir,
                    a.seed,
                    {{"snr_db", join_numbers(a.snr)},
                     {"sources", a.sources},
                     {"seeds", a.seeds},
                     {"iterations", a.iterations},
                     {"devices", a.devices},
                     {"room",
                      {{"width", a.room.width},
                       {"depth", a.room.depth},
                       {"absorption", a.room.absorption},
                       {"reflection_order", a.room.reflection_order}}},
                     {"reg", a.channels.reg},
                     {"guard_s", a.channels.guard_seconds},
                     {"peak_fraction", a.peak_fraction},
                     {"jobs", a.jobs}},
                    {"converge.csv"}});
    for (const auto& r : rows)
        if (r.iteration + 1 == a.iterations)
            out << "snr " << config::format_number(r.snr_db) << " dB, " << to_string(r.source)
                << ": final mean correlation " << brief(r.mean_correlation) << '\n';
    return kExitOk;
}

// ---- p2p ------------------------------------------------------------------

struct P2PArgs {
    std::string config;
    std::string out;
    bool study = false;
    bool acoustic = false;
    double noise_deg = 0.0;
    std::vector<std::size_t> study_devices{4, 6, 8};
    std::vector<double> study_noise{0.0, 2.0};
    std::size_t trials = 20;
    std::uint64_t seed = 1;
    double tol_deg = 10.0;
    int restarts = 10;
    bool absolute = false;
};

locate::PairwiseAoas acoustic_bearings(const Scene& scene) {
    const auto chirp = sim::make_source(SourceKind::chirp, 0.1, scene.sample_rate, scene.seed);
    locate::PairwiseAoas p;
    p.device_count = scene.devices.size();
    for (std::size_t e = 0; e < scene.devices.size(); ++e)
        for (std::size_t r = 0; r < scene.devices.size(); ++r) {
            if (e == r) continue;
            const auto mics = sim::record_emission(scene, e, r, chirp);
            std::vector<ImpulseResponse> channels;
            for (const auto& m : mics) channels.push_back(dsp::deconvolve(m, chirp, dsp::default_channel_len(scene.sample_rate)));
            p.set(r, e, aoa::estimate_aoa_from_channels(channels, scene.devices[r]).angle);
        }
    return p;
}

int cmd_p2p(const P2PArgs& a, std::ostream& out) {
    locate::P2POptions opts;
    opts.restarts = a.restarts;
    opts.reliability_tol = deg2rad(a.tol_deg);
    opts.mode = a.absolute ? locate::ResidualMode::absolute : locate::ResidualMode::squared;
    opts.seed = a.seed;
    const fs::path dir = a.out;
    nlohmann::json params{{"tol_deg", a.tol_deg}, {"restarts", a.restarts}, {"absolute", a.absolute}};

    if (a.study) {
        if (!a.config.empty()) throw UsageError("--study takes no config file");
        eval::P2PConfig c;
        c.device_counts = a.study_devices;
        c.noise_deg = a.study_noise;
        c.trials = a.trials;
        c.seed = a.seed;
        c.options = opts;
        for (auto n : a.study_devices)
            if (n < 3) throw UsageError("--devices entries must be at least 3");
        const auto rows = eval::p2p_study(c);
        prepare_output(dir);
        config::write_text(dir / "p2p_study.csv", eval::p2p_csv(rows));
        params["devices"] = a.study_devices;
        params["noise_deg"] = join_numbers(a.study_noise);
        params["trials"] = a.trials;
        write_manifest({"p2p", "", dir, a.seed, params, {"p2p_study.csv"}});
        for (auto n : a.study_devices)
            for (double noise : a.study_noise) {
                std::vector<double> errs;
                for (const auto& r : rows)
                    if (r.n_devices == n && r.noise_deg == noise) errs.push_back(r.median_error);
                out << n << " devices, noise " << config::format_number(noise) << " deg: median error "
                    << brief(eval::median(errs)) << " m\n";
            }
        return kExitOk;
    }

    if (a.config.empty()) throw UsageError("p2p needs a scene config, or --study");
    const auto scene = config::load_scene(a.config);
    if (scene.devices.size() < 3) throw UsageError("p2p needs at least 3 devices");
    locate::PairwiseAoas bearings;
    if (a.acoustic) {
        bearings = acoustic_bearings(scene);
    } else {
        std::mt19937_64 rng(a.seed);
        bearings = eval::pairwise_bearings(scene.devices, deg2rad(a.noise_deg), &rng);
    }
    locate::Anchors anchors;
    anchors.poses.push_back({0, scene.devices[0].position, scene.devices[0].orientation});
    anchors.distances.push_back({0, 1, distance(scene.devices[0].position, scene.devices[1].position)});
    const auto layout = locate::p2p_localize(bearings, anchors, opts);

    std::vector<Vec2> truth;
    for (const auto& d : scene.devices) truth.push_back(d.position);
    std::string csv = "device,x,y,orientation_deg,true_x,true_y,true_orientation_deg,error_m\n";
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double err = distance(layout.positions[i], truth[i]);
        sq += err * err;
        csv += std::to_string(i) + ',' + config::format_number(layout.positions[i].x) + ',' +
               config::format_number(layout.positions[i].y) + ',' +
               config::format_number(rad2deg(wrap_2pi(layout.orientations[i]))) + ',' + config::format_number(truth[i].x) +
               ',' + config::format_number(truth[i].y) + ',' +
               config::format_number(rad2deg(wrap_2pi(scene.devices[i].orientation))) + ',' + config::format_number(err) +
               '\n';
    }
    const double rms_error = std::sqrt(sq / static_cast<double>(truth.size()));

    config::DevicesDocument doc;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        DevicePose d = scene.devices[i];
        d.position = layout.positions[i];
        d.orientation = wrap_2pi(layout.orientations[i]);
        doc.devices.push_back(d);
    }
    doc.gauge = layout.gauge;
    doc.residual_rms = layout.residual_rms;

    prepare_output(dir);
    config::write_text(dir / "layout.yaml", config::serialize_devices(doc));
    config::write_text(dir / "p2p.csv", csv);
    const nlohmann::json report{{"residual_rms_rad", layout.residual_rms},
                                {"rms_error_m", rms_error},
                                {"gauge", layout.gauge},
                                {"acoustic", a.acoustic}};
    config::write_text(dir / "report.json", report.dump(2) + "\n");
    params["noise_deg"] = a.noise_deg;
    params["acoustic"] = a.acoustic;
    write_manifest({"p2p", a.config, dir, a.seed, params, {"layout.yaml", "p2p.csv", "report.json"}});
    out << "residual rms: " << brief(layout.residual_rms) << " rad\n"
        << "position rms error: " << brief(rms_error) << " m\n";
    return kExitOk;
}

void add_room_flags(CLI::App& cmd, Room& room) {
    cmd.add_option("--width", room.width, "Room width (m)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--depth", room.depth, "Room depth (m)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.add_option("--absorption", room.absorption, "Wall absorption in [0, 1]")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--reflection-order", room.reflection_order, "Image-source reflection order")
        ->capture_default_str()
        ->check(CLI::Range(0, 3));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Facing-direction inference for distributed microphone arrays"};
    app.name("facing");
    app.require_subcommand(1);
    app.set_version_flag("--version", FACING_VERSION);

    const auto names = pattern_names();
    const std::vector<std::string> sources{"gaussian", "speech_like", "chirp"};

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Render per-mic observations and ground truth for a scene");
    sim_cmd->add_option("config", sim_args.config, "Scene config (YAML)")->required();
    sim_cmd->add_option("-o,--out", sim_args.out, "Output directory")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "Override the scene seed");
    sim_cmd->add_option("--snr", sim_args.snr, "Calibrate noise to this SNR~ (dB) instead of the noise floor");
    sim_cmd->add_option("--reflection-order", sim_args.reflection_order, "Override the room reflection order");

    InferArgs inf_args;
    auto* inf_cmd = app.add_subcommand("infer", "Infer which device the speaker faces");
    inf_cmd->add_option("observations", inf_args.observations, "Directory of dev{i}_mic{j}.wav files")->required();
    inf_cmd->add_option("-l,--layout", inf_args.layout, "Scene or layout file with device poses")->required();
    inf_cmd->add_option("-p,--pattern", inf_args.pattern, "Radiation pattern")
        ->capture_default_str()
        ->check(CLI::IsMember(names));
    inf_cmd->add_option("-o,--out", inf_args.out, "Also write decision.json and a manifest here");
    inf_cmd->add_flag("--json", inf_args.json, "Print the machine-readable report");
    add_infer_flags(*inf_cmd, inf_args.params);

    AoaArgs aoa_args;
    auto* aoa_cmd = app.add_subcommand("aoa", "Estimate the angle of arrival at each device");
    aoa_cmd->add_option("observations", aoa_args.observations, "Directory of dev{i}_mic{j}.wav files")->required();
    aoa_cmd->add_option("-l,--layout", aoa_args.layout, "Scene or layout file with device poses")->required();
    aoa_cmd->add_option("--device", aoa_args.device, "Only this device");
    aoa_cmd->add_option("-o,--out", aoa_args.out, "Also write aoa.json and a manifest here");
    aoa_cmd->add_flag("--json", aoa_args.json, "Print JSON");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo accuracy benchmark on simulated scenes");
    eval_cmd->add_option("-o,--out", eval_args.out, "Output directory")->required();
    eval_cmd->add_option("--devices", eval_args.devices, "Device counts")->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--snr", eval_args.snr, "SNR~ targets (dB); inf records without noise")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--patterns", eval_args.patterns, "Patterns used for matching")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::IsMember(names));
    eval_cmd->add_option("--trials", eval_args.trials, "Trials per (devices, SNR) cell")->capture_default_str();
    eval_cmd->add_option("--source", eval_args.source, "Source waveform")
        ->capture_default_str()
        ->check(CLI::IsMember(sources));
    eval_cmd->add_option("--duration", eval_args.duration, "Source duration (s)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_room_flags(*eval_cmd, eval_args.room);
    eval_cmd->add_option("--min-separation", eval_args.min_separation,
                         "Place devices around the user at least this far apart (deg); 0 scatters them")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 180.0));
    eval_cmd->add_option("--seed", eval_args.seed, "Base seed")->capture_default_str();
    eval_cmd->add_option("-j,--jobs", eval_args.jobs, "Worker threads (0 = all cores)")->capture_default_str();
    add_infer_flags(*eval_cmd, eval_args.params);

    ConvergeArgs conv_args;
    auto* conv_cmd = app.add_subcommand("converge", "First-tap correlation per iteration of channel estimation");
    conv_cmd->add_option("-o,--out", conv_args.out, "Output directory")->required();
    conv_cmd->add_option("--snr", conv_args.snr, "SNR~ grid (dB)")->delimiter(',')->capture_default_str();
    conv_cmd->add_option("--sources", conv_args.sources, "Source waveforms")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::IsMember(sources));
    conv_cmd->add_option("--seeds", conv_args.seeds, "Scenes per (SNR, source) cell")->capture_default_str();
    conv_cmd->add_option("--iterations", conv_args.iterations, "Iterations to record")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    conv_cmd->add_option("--devices", conv_args.devices, "Devices per scene")->capture_default_str();
    add_room_flags(*conv_cmd, conv_args.room);
    conv_cmd->add_option("--seed", conv_args.seed, "Base seed")->capture_default_str();
    conv_cmd->add_option("-j,--jobs", conv_args.jobs, "Worker threads (0 = all cores)")->capture_default_str();
    conv_cmd->add_option("--reg", conv_args.channels.reg, "Deconvolution regularisation")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    conv_cmd->add_option("--guard", conv_args.channels.guard_seconds, "Peak guard lag (s)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    conv_cmd->add_option("--peak-fraction", conv_args.peak_fraction, "First-peak threshold fraction")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    P2PArgs p2p_args;
    auto* p2p_cmd = app.add_subcommand("p2p", "Recover device positions and orientations from pairwise bearings");
    p2p_cmd->add_option("config", p2p_args.config, "Scene config supplying the true layout");
    p2p_cmd->add_option("-o,--out", p2p_args.out, "Output directory")->required();
    p2p_cmd->add_flag("--acoustic", p2p_args.acoustic, "Measure bearings from simulated chirps instead of geometry");
    p2p_cmd->add_option("--noise-deg", p2p_args.noise_deg, "Gaussian bearing noise (deg) for geometric bearings")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    p2p_cmd->add_flag("--study", p2p_args.study, "Run the randomized layout study instead of one scene");
    p2p_cmd->add_option("--devices", p2p_args.study_devices, "Study device counts")->delimiter(',')->capture_default_str();
    p2p_cmd->add_option("--noise", p2p_args.study_noise, "Study noise levels (deg)")->delimiter(',')->capture_default_str();
    p2p_cmd->add_option("--trials", p2p_args.trials, "Study trials per cell")->capture_default_str();
    p2p_cmd->add_option("--seed", p2p_args.seed, "Seed")->capture_default_str();
    p2p_cmd->add_option("--tol", p2p_args.tol_deg, "Reciprocity tolerance (deg) for discarding bearings")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    p2p_cmd->add_option("--restarts", p2p_args.restarts, "Optimizer multi-starts")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    p2p_cmd->add_flag("--absolute", p2p_args.absolute, "Minimise absolute instead of squared residuals");

    std::vector<const char*> args(argv, argv + argc);
    try {
        app.parse(static_cast<int>(args.size()), const_cast<char**>(args.data()));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << FACING_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "facing: " << e.what() << '\n';
        err << "run 'facing --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (*sim_cmd) return cmd_simulate(sim_args, out);
        if (*inf_cmd) return cmd_infer(inf_args, out);
        if (*aoa_cmd) return cmd_aoa(aoa_args, out);
        if (*eval_cmd) return cmd_eval(eval_args, out);
        if (*conv_cmd) return cmd_converge(conv_args, out);
        if (*p2p_cmd) return cmd_p2p(p2p_args, out);
    } catch (const ConfigError& e) {
        err << "facing: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "facing: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "facing: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace facing::cli
