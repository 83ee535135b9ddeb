#include "facing/evalkit.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "facing/config.hpp"
#include "facing/error.hpp"
#include "facing/simulate.hpp"

namespace facing::eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> user_bearings(std::span<const Vec2> positions, Vec2 user) {
    std::vector<double> out;
    for (const auto& p : positions) out.push_back(bearing(user, p));
    return out;
}

void check_indices(std::span<const Vec2> positions, std::size_t a, std::size_t b) {
    if (a >= positions.size() || b >= positions.size()) throw InvalidInput("device index out of range");
}

std::size_t bucket_of(double separation) {
    return std::min<std::size_t>(3, static_cast<std::size_t>(std::max(0.0, separation) / 20.0));
}

std::vector<DevicePose> ring_devices(const SceneSpec& spec, Vec2 user, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double n = static_cast<double>(spec.devices);
    const double slack = 360.0 - n * spec.min_separation_deg;
    if (slack < 0.0) throw InvalidInput("random_scene: separation too large for the device count");
    std::vector<double> w(spec.devices);
    for (auto& x : w) x = -std::log(1.0 - uni(rng));
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    double angle = 360.0 * uni(rng);
    std::vector<DevicePose> out;
    for (std::size_t i = 0; i < spec.devices; ++i) {
        const double r = 0.8 + 1.4 * uni(rng);
        DevicePose d;
        d.position = user + r * unit(deg2rad(angle));
        d.orientation = 2.0 * std::numbers::pi * uni(rng);
        out.push_back(d);
        angle += spec.min_separation_deg + slack * w[i] / total;
    }
    return out;
}

std::vector<DevicePose> scattered_devices(const SceneSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(0.3, spec.room.width - 0.3), uy(0.3, spec.room.depth - 0.3);
    std::uniform_real_distribution<double> uo(0.0, 2.0 * std::numbers::pi);
    std::vector<DevicePose> out;
    while (out.size() < spec.devices) {
        DevicePose d;
        d.position = {ux(rng), uy(rng)};
        d.orientation = uo(rng);
        const bool spaced = std::all_of(out.begin(), out.end(), [&](const DevicePose& o) {
            return distance(o.position, d.position) >= 0.5;
        });
        if (spaced) out.push_back(d);
    }
    return out;
}

bool all_inside(const Room& room, std::span<const DevicePose> devices, double margin) {
    return std::all_of(devices.begin(), devices.end(), [&](const DevicePose& d) {
        return d.position.x > margin && d.position.x < room.width - margin && d.position.y > margin &&
               d.position.y < room.depth - margin;
    });
}

std::string format(double v) { return config::format_number(v); }

double parse_double(const std::string& s) {
    if (s == ".inf" || s == "inf") return kInf;
    if (s == "-.inf" || s == "-inf") return -kInf;
    return std::stod(s);
}

}  // namespace

double fde(std::span<const Vec2> positions, Vec2 user, std::size_t true_k, std::size_t chosen_k) {
    check_indices(positions, true_k, chosen_k);
    if (true_k == chosen_k) return 0.0;
    return std::abs(rad2deg(wrap_pi(bearing(user, positions[chosen_k]) - bearing(user, positions[true_k]))));
}

int fie(std::span<const Vec2> positions, Vec2 user, std::size_t true_k, std::size_t chosen_k) {
    check_indices(positions, true_k, chosen_k);
    if (true_k == chosen_k) return 0;
    const auto b = user_bearings(positions, user);
    const double span = wrap_pi(b[chosen_k] - b[true_k]);
    auto count_on_arc = [&](double arc) {
        int count = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (i == true_k || i == chosen_k) continue;
            double a = wrap_pi(b[i] - b[true_k]);
            if (arc > 0.0 ? (a > 0.0 && a < arc) : (a < 0.0 && a > arc)) ++count;
        }
        return count;
    };
    int between = count_on_arc(span);
    if (std::abs(span) == std::numbers::pi) between = std::min(between, count_on_arc(-span));
    return 1 + between;
}

double separation_deg(std::span<const Vec2> positions, Vec2 user, std::size_t k) {
    if (k >= positions.size()) throw InvalidInput("device index out of range");
    double best = 180.0;
    for (std::size_t i = 0; i < positions.size(); ++i)
        if (i != k) best = std::min(best, fde(positions, user, k, i));
    return best;
}

GeneratedScene random_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.devices < 2) throw InvalidInput("random_scene: at least two devices");
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    GeneratedScene out;
    auto& s = out.scene;
    s.room = spec.room;
    s.source = spec.source;
    s.duration = spec.duration;
    s.sample_rate = spec.sample_rate;
    s.seed = seed;
    s.pattern = spec.pattern;

    for (int attempt = 0;; ++attempt) {
        if (attempt > 10000) throw InvalidInput("random_scene: could not place devices in the room");
        if (spec.min_separation_deg > 0.0) {
            const Vec2 user{spec.room.width * (0.3 + 0.4 * uni(rng)), spec.room.depth * (0.3 + 0.4 * uni(rng))};
            auto devices = ring_devices(spec, user, rng);
            if (!all_inside(spec.room, devices, 0.2)) continue;
            s.user.position = user;
            s.devices = std::move(devices);
            break;
        }
        auto devices = scattered_devices(spec, rng);
        const Vec2 user{0.5 + (spec.room.width - 1.0) * uni(rng), 0.5 + (spec.room.depth - 1.0) * uni(rng)};
        const bool clear = std::all_of(devices.begin(), devices.end(),
                                       [&](const DevicePose& d) { return distance(d.position, user) >= 0.8; });
        if (!clear) continue;
        s.user.position = user;
        s.devices = std::move(devices);
        break;
    }
    out.true_k = std::min<std::size_t>(spec.devices - 1, static_cast<std::size_t>(uni(rng) * static_cast<double>(spec.devices)));
    s.user.facing = wrap_2pi(bearing(s.user.position, s.devices[out.true_k].position));
    validate(s);
    return out;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    unsigned workers = jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

BenchmarkResult run_benchmark(const SuiteConfig& suite) {
    if (suite.rooms.empty() || suite.device_counts.empty() || suite.snr_grid.empty() || suite.patterns.empty())
        throw InvalidInput("run_benchmark: empty suite dimension");
    std::vector<RadiationPattern> patterns;
    for (const auto& name : suite.patterns) {
        if (std::count(suite.patterns.begin(), suite.patterns.end(), name) > 1)
            throw InvalidInput("run_benchmark: pattern '" + name + "' listed twice");
        patterns.push_back(pattern_by_name(name));
    }

    struct Cell {
        std::size_t scene_id;
        std::size_t devices;
        double snr;
        std::size_t room;
    };
    std::vector<Cell> cells;
    std::size_t id = 0;
    for (double snr : suite.snr_grid)
        for (std::size_t n : suite.device_counts)
            for (std::size_t t = 0; t < suite.trials_per_cell; ++t)
                cells.push_back({id++, n, snr, t % suite.rooms.size()});

    std::vector<std::vector<TrialResult>> results(cells.size());
    parallel_for(cells.size(), suite.jobs, [&](std::size_t c) {
        const auto& cell = cells[c];
        SceneSpec spec;
        spec.room = suite.rooms[cell.room];
        spec.devices = cell.devices;
        spec.min_separation_deg = suite.min_separation_deg;
        spec.source = suite.source;
        spec.duration = suite.duration;
        // Scenes are paired across the SNR grid: the seed ignores the SNR index.
        const std::uint64_t seed = suite.seed * 1000003ULL + (cell.scene_id % (suite.device_counts.size() * suite.trials_per_cell));
        const auto generated = random_scene(spec, seed);
        const auto& scene = generated.scene;

        sim::RecordOptions rec_opts;
        if (std::isfinite(cell.snr)) rec_opts.snr_tilde_db = cell.snr;
        const auto rec = sim::record(scene, rec_opts);

        const auto start = std::chrono::steady_clock::now();
        const auto decision = direction::infer(rec.observations, scene.devices, patterns.front(), suite.params);
        const double runtime = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

        std::vector<Vec2> positions;
        for (const auto& d : scene.devices) positions.push_back(d.position);
        for (std::size_t p = 0; p < patterns.size(); ++p) {
            const auto chosen = p == 0 ? decision.device_index
                                       : direction::match_pattern(decision.equalized_powers, positions, decision.user_location,
                                                                  patterns[p], suite.params.match)
                                             .device_index;
            TrialResult r;
            r.scene_id = cell.scene_id;
            r.n_devices = cell.devices;
            r.snr_target_db = cell.snr;
            r.pattern = patterns[p].name;
            r.true_k = generated.true_k;
            r.chosen_k = chosen;
            r.fde = fde(positions, scene.user.position, generated.true_k, chosen);
            r.fie = fie(positions, scene.user.position, generated.true_k, chosen);
            r.loc_error = distance(decision.user_location, scene.user.position);
            r.snr_tilde = rec.truth.snr_tilde_db;
            r.separation = separation_deg(positions, scene.user.position, generated.true_k);
            r.iterations = decision.trace.iterations_used;
            r.runtime_ms = runtime;
            results[c].push_back(r);
        }
    });

    BenchmarkResult out;
    for (auto& group : results)
        for (auto& r : group) out.rows.push_back(std::move(r));
    out.summary = summarize(out.rows);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<SummaryRow> summarize(std::span<const TrialResult> rows) {
    std::map<std::tuple<std::size_t, double, std::string>, std::vector<const TrialResult*>> groups;
    for (const auto& r : rows) groups[{r.n_devices, r.snr_target_db, r.pattern}].push_back(&r);

    std::vector<SummaryRow> out;
    for (const auto& [key, members] : groups) {
        SummaryRow s;
        std::tie(s.n_devices, s.snr_target_db, s.pattern) = key;
        s.trials = members.size();
        s.fie_histogram.assign(4, 0);
        s.bucket_trials.assign(4, 0);
        std::vector<std::size_t> bucket_hits(4, 0);
        std::vector<double> fdes, locs;
        std::size_t correct = 0, errors = 0, fie1 = 0;
        for (const auto* r : members) {
            const bool hit = r->chosen_k == r->true_k;
            correct += hit;
            errors += !hit;
            fie1 += r->fie == 1;
            fdes.push_back(r->fde);
            locs.push_back(r->loc_error);
            s.fie_histogram[static_cast<std::size_t>(std::min(r->fie, 3))]++;
            const auto b = bucket_of(r->separation);
            s.bucket_trials[b]++;
            bucket_hits[b] += hit;
        }
        s.accuracy = static_cast<double>(correct) / static_cast<double>(s.trials);
        s.median_fde = median(fdes);
        s.median_loc_error = median(locs);
        s.fie1_share_of_errors = errors ? static_cast<double>(fie1) / static_cast<double>(errors) : 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            s.bucket_accuracy.push_back(s.bucket_trials[b] ? static_cast<double>(bucket_hits[b]) / static_cast<double>(s.bucket_trials[b])
                                                           : std::numeric_limits<double>::quiet_NaN());
        out.push_back(std::move(s));
    }
    return out;
}

std::string trials_csv(std::span<const TrialResult> rows) {
    std::ostringstream out;
    out << "scene_id,n_devices,snr_target_db,pattern,true_k,chosen_k,fde_deg,fie,loc_error_m,snr_tilde_db,"
           "separation_deg,iterations\n";
    for (const auto& r : rows)
        out << r.scene_id << ',' << r.n_devices << ',' << format(r.snr_target_db) << ',' << r.pattern << ',' << r.true_k
            << ',' << r.chosen_k << ',' << format(r.fde) << ',' << r.fie << ',' << format(r.loc_error) << ','
            << format(r.snr_tilde) << ',' << format(r.separation) << ',' << r.iterations << '\n';
    return out.str();
}

std::string timings_csv(std::span<const TrialResult> rows) {
    std::ostringstream out;
    out << "scene_id,pattern,runtime_ms\n";
    for (const auto& r : rows) out << r.scene_id << ',' << r.pattern << ',' << format(r.runtime_ms) << '\n';
    return out.str();
}

std::vector<TrialResult> parse_trials_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<TrialResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 12) throw InvalidInput("parse_trials_csv: expected 12 columns");
        TrialResult r;
        r.scene_id = std::stoul(f[0]);
        r.n_devices = std::stoul(f[1]);
        r.snr_target_db = parse_double(f[2]);
        r.pattern = f[3];
        r.true_k = std::stoul(f[4]);
        r.chosen_k = std::stoul(f[5]);
        r.fde = parse_double(f[6]);
        r.fie = std::stoi(f[7]);
        r.loc_error = parse_double(f[8]);
        r.snr_tilde = parse_double(f[9]);
        r.separation = parse_double(f[10]);
        r.iterations = std::stoi(f[11]);
        out.push_back(std::move(r));
    }
    return out;
}

std::string summary_json(std::span<const SummaryRow> summary) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return format(v);
    };
    nlohmann::json doc;
    doc["csv_schema_version"] = kCsvSchemaVersion;
    doc["buckets_deg"] = {"0-20", "20-40", "40-60", ">=60"};
    doc["groups"] = nlohmann::json::array();
    for (const auto& s : summary) {
        nlohmann::json g;
        g["n_devices"] = s.n_devices;
        g["snr_target_db"] = num(s.snr_target_db);
        g["pattern"] = s.pattern;
        g["trials"] = s.trials;
        g["accuracy"] = s.accuracy;
        g["median_fde_deg"] = num(s.median_fde);
        g["median_loc_error_m"] = num(s.median_loc_error);
        g["fie_histogram"] = s.fie_histogram;
        g["fie1_share_of_errors"] = s.fie1_share_of_errors;
        g["bucket_trials"] = s.bucket_trials;
        nlohmann::json acc = nlohmann::json::array();
        for (double a : s.bucket_accuracy) acc.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
        g["bucket_accuracy"] = acc;
        doc["groups"].push_back(g);
    }
    return doc.dump(2) + "\n";
}

std::vector<double> first_tap_correlations(const Scene& scene, double snr_db, int iterations,
                                           const direction::ChannelOptions& channels, const direction::LosOptions& los) {
    sim::RecordOptions opts;
    if (std::isfinite(snr_db)) opts.snr_tilde_db = snr_db;
    const auto rec = sim::record(scene, opts);
    std::vector<Signal> combined;
    for (std::size_t i = 0; i < scene.devices.size(); ++i)
        combined.push_back(direction::steer(rec.observations[i], scene.devices[i], rec.truth.aoas[i]));
    auto options = channels;
    options.max_iterations = iterations;
    options.stop_at_threshold = false;
    const auto trace = direction::estimate_channels(combined, options);
    auto correlation = [&](const direction::IterationRecord& it) {
        auto amps = direction::extract_los_power(it.device_channels, los).powers;
        for (auto& a : amps) a = std::sqrt(a);
        return direction::pearson(amps, rec.truth.los_amplitudes);
    };
    std::vector<double> out;
    for (const auto& it : trace.iterations) out.push_back(correlation(it));
    // A diverged run stops early and reports its best-so-far estimate from then on.
    const double held = correlation(trace.result());
    while (static_cast<int>(out.size()) < iterations) out.push_back(held);
    return out;
}

std::vector<ConvergeRow> converge_study(const ConvergeConfig& config) {
    struct Job {
        double snr;
        SourceKind source;
        std::size_t seed;
    };
    std::vector<Job> jobs;
    for (double snr : config.snr_grid)
        for (auto src : config.sources)
            for (std::size_t s = 0; s < config.seeds; ++s) jobs.push_back({snr, src, s});

    std::vector<std::vector<double>> curves(jobs.size());
    parallel_for(jobs.size(), config.jobs, [&](std::size_t j) {
        SceneSpec spec;
        spec.room = config.room;
        spec.devices = config.devices;
        spec.source = jobs[j].source;
        spec.duration = config.duration;
        const auto generated = random_scene(spec, config.base_seed * 7919ULL + jobs[j].seed);
        curves[j] = first_tap_correlations(generated.scene, jobs[j].snr, config.iterations, config.channels, config.los);
    });

    std::vector<ConvergeRow> out;
    std::size_t j = 0;
    for (double snr : config.snr_grid)
        for (auto src : config.sources) {
            for (int it = 0; it < config.iterations; ++it) {
                std::vector<double> values;
                for (std::size_t s = 0; s < config.seeds; ++s) values.push_back(curves[j + s][static_cast<std::size_t>(it)]);
                const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
                out.push_back({snr, src, it, mean, median(values)});
            }
            j += config.seeds;
        }
    return out;
}

std::string converge_csv(std::span<const ConvergeRow> rows) {
    std::ostringstream out;
    out << "snr_db,source,iteration,correlation,median_correlation\n";
    for (const auto& r : rows)
        out << format(r.snr_db) << ',' << to_string(r.source) << ',' << r.iteration << ',' << format(r.mean_correlation)
            << ',' << format(r.median_correlation) << '\n';
    return out.str();
}

locate::PairwiseAoas pairwise_bearings(std::span<const DevicePose> devices, double noise_rad, std::mt19937_64* rng) {
    std::normal_distribution<double> noise(0.0, noise_rad);
    locate::PairwiseAoas p;
    p.device_count = devices.size();
    for (std::size_t i = 0; i < devices.size(); ++i)
        for (std::size_t j = 0; j < devices.size(); ++j) {
            if (i == j) continue;
            double angle = bearing(devices[i].position, devices[j].position) - devices[i].orientation;
            if (rng != nullptr && noise_rad > 0.0) angle += noise(*rng);
            p.set(i, j, angle);
        }
    return p;
}

std::vector<P2PRow> p2p_study(const P2PConfig& config) {
    std::vector<P2PRow> out;
    for (std::size_t n : config.device_counts)
        for (double noise : config.noise_deg)
            for (std::size_t t = 0; t < config.trials; ++t) {
                SceneSpec spec;
                spec.room = config.room;
                spec.devices = n;
                const std::uint64_t seed = config.seed * 104729ULL + n * 1000ULL + t;
                const auto scene = random_scene(spec, seed).scene;
                std::mt19937_64 rng(seed ^ 0xA5A5A5A5ULL);
                const auto aoas = pairwise_bearings(scene.devices, deg2rad(noise), &rng);
                locate::Anchors anchors;
                anchors.poses.push_back({0, scene.devices[0].position, scene.devices[0].orientation});
                anchors.distances.push_back({0, 1, distance(scene.devices[0].position, scene.devices[1].position)});
                auto opts = config.options;
                opts.seed = seed;
                const auto layout = locate::p2p_localize(aoas, anchors, opts);

                std::vector<Vec2> truth;
                for (const auto& d : scene.devices) truth.push_back(d.position);
                const auto aligned = locate::align_similarity(layout.positions, truth);
                std::vector<double> errors;
                double sq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    errors.push_back(distance(aligned[i], truth[i]));
                    sq += errors.back() * errors.back();
                }
                out.push_back({t, n, noise, layout.residual_rms, std::sqrt(sq / static_cast<double>(n)), median(errors)});
            }
    return out;
}

std::string p2p_csv(std::span<const P2PRow> rows) {
    std::ostringstream out;
    out << "trial,n_devices,noise_deg,residual_rms_rad,rms_error_m,median_error_m\n";
    for (const auto& r : rows)
        out << r.trial << ',' << r.n_devices << ',' << format(r.noise_deg) << ',' << format(r.residual_rms) << ','
            << format(r.rms_error) << ',' << format(r.median_error) << '\n';
    return out.str();
}

}  // namespace facing::eval
