#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "facing/evalkit.hpp"
#include "facing/simulate.hpp"

using namespace facing;

namespace {

std::vector<Vec2> at_bearings(Vec2 user, std::initializer_list<double> degrees, double r = 2.0) {
    std::vector<Vec2> out;
    for (double d : degrees) out.push_back({user.x + r * std::cos(deg2rad(d)), user.y + r * std::sin(deg2rad(d))});
    return out;
}

eval::SuiteConfig small_suite() {
    eval::SuiteConfig s;
    s.rooms = {Room{5.0, 5.0, 0.5, 1}};
    s.device_counts = {2, 4};
    s.snr_grid = {30.0};
    s.patterns = {"cardioid", "frontal"};
    s.trials_per_cell = 3;
    s.seed = 11;
    s.duration = 0.5;
    s.jobs = 1;
    return s;
}

}  // namespace

TEST_CASE("fde") {
    const Vec2 user{0, 0};
    const auto pos = at_bearings(user, {0, 90, 200});
    CHECK(eval::fde(pos, user, 0, 0) == 0.0);
    CHECK(eval::fde(pos, user, 0, 1) == doctest::Approx(90.0));
    CHECK(eval::fde(pos, user, 1, 0) == doctest::Approx(90.0));
    CHECK(eval::fde(pos, user, 0, 2) == doctest::Approx(160.0));
    CHECK(eval::fde(pos, user, 1, 2) == doctest::Approx(110.0));
}

TEST_CASE("fie") {
    const Vec2 user{1, 1};
    const auto pos = at_bearings(user, {0, 40, 80, 120, 250});
    CHECK(eval::fie(pos, user, 0, 0) == 0);
    CHECK(eval::fie(pos, user, 0, 1) == 1);
    CHECK(eval::fie(pos, user, 0, 2) == 2);
    CHECK(eval::fie(pos, user, 2, 0) == 2);
    CHECK(eval::fie(pos, user, 0, 3) == 3);
    CHECK(eval::fie(pos, user, 0, 4) == 1);  // shorter arc runs through 360
    CHECK(eval::fie(pos, user, 1, 4) == 2);
}

TEST_CASE("removing intervening devices lowers FIE by their count") {
    const Vec2 user{0, 0};
    const auto full = at_bearings(user, {10, 35, 60, 95, 300});
    const auto pruned = at_bearings(user, {10, 95, 300});
    CHECK(eval::fie(full, user, 0, 3) == 3);
    CHECK(eval::fie(pruned, user, 0, 1) == 1);
    CHECK(eval::fde(full, user, 0, 3) == doctest::Approx(eval::fde(pruned, user, 0, 1)));
}

TEST_CASE("bearing ties are not counted") {
    const Vec2 user{0, 0};
    std::vector<Vec2> pos = at_bearings(user, {0, 90});
    pos.push_back({0.0, 4.0});  // same bearing as device 1, further away
    CHECK(eval::fie(pos, user, 0, 1) == 1);
    CHECK(eval::fie(pos, user, 0, 2) == 1);
}

TEST_CASE("fie is zero exactly when fde is zero on random layouts") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        eval::SceneSpec spec;
        spec.devices = 6;
        const auto g = eval::random_scene(spec, seed);
        std::vector<Vec2> pos;
        for (const auto& d : g.scene.devices) pos.push_back(d.position);
        for (std::size_t a = 0; a < pos.size(); ++a)
            for (std::size_t b = 0; b < pos.size(); ++b)
                CHECK((eval::fie(pos, g.scene.user.position, a, b) == 0) == (eval::fde(pos, g.scene.user.position, a, b) == 0.0));
    }
}

TEST_CASE("separation_deg") {
    const Vec2 user{0, 0};
    const auto pos = at_bearings(user, {0, 30, 100, 250});
    CHECK(eval::separation_deg(pos, user, 0) == doctest::Approx(30.0));
    CHECK(eval::separation_deg(pos, user, 2) == doctest::Approx(70.0));
    CHECK(eval::separation_deg(pos, user, 3) == doctest::Approx(110.0));
}

TEST_CASE("random_scene") {
    eval::SceneSpec spec;
    spec.devices = 5;
    const auto a = eval::random_scene(spec, 3), b = eval::random_scene(spec, 3);
    CHECK(a.true_k == b.true_k);
    CHECK(a.scene.user.position.x == b.scene.user.position.x);
    CHECK_NOTHROW(validate(a.scene));
    CHECK(std::abs(wrap_pi(a.scene.user.facing - bearing(a.scene.user.position, a.scene.devices[a.true_k].position))) < 1e-12);

    spec.min_separation_deg = 45.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto g = eval::random_scene(spec, seed);
        CHECK_NOTHROW(validate(g.scene));
        std::vector<Vec2> pos;
        for (const auto& d : g.scene.devices) pos.push_back(d.position);
        for (std::size_t k = 0; k < pos.size(); ++k) CHECK(eval::separation_deg(pos, g.scene.user.position, k) >= 45.0 - 1e-9);
    }
}

TEST_CASE("run_benchmark is deterministic and thread-count independent") {
    auto suite = small_suite();
    const auto a = eval::run_benchmark(suite);
    suite.jobs = 3;
    const auto b = eval::run_benchmark(suite);
    CHECK(eval::trials_csv(a.rows) == eval::trials_csv(b.rows));
    CHECK(eval::summary_json(a.summary) == eval::summary_json(b.summary));
    CHECK(eval::timings_csv(a.rows).rfind("scene_id,pattern,runtime_ms\n", 0) == 0);
    CHECK(a.rows.size() == 2 * 3 * 2);
    for (const auto& r : a.rows) {
        CHECK(r.fde >= 0.0);
        CHECK(r.fie >= 0);
        CHECK((r.fie == 0) == (r.chosen_k == r.true_k));
    }
}

TEST_CASE("summary recomputed from the CSV matches the emitted summary") {
    const auto result = eval::run_benchmark(small_suite());
    const auto csv = eval::trials_csv(result.rows);
    const auto parsed = eval::parse_trials_csv(csv);
    REQUIRE(parsed.size() == result.rows.size());
    CHECK(eval::trials_csv(parsed) == csv);
    CHECK(eval::summary_json(eval::summarize(parsed)) == eval::summary_json(result.summary));
}

TEST_CASE("parse_trials_csv rejects foreign files") {
    CHECK_THROWS((void)eval::parse_trials_csv("a,b,c\n1,2,3\n"));
}

TEST_CASE("accuracy degrades as SNR drops") {
    eval::SuiteConfig s;
    s.rooms = {Room{5.0, 5.0, 0.5, 0}};
    s.device_counts = {4};
    s.snr_grid = {30.0, 5.0, 1.0};
    s.trials_per_cell = 20;
    s.duration = 0.5;
    s.seed = 5;
    const auto result = eval::run_benchmark(s);
    REQUIRE(result.summary.size() == 3);
    auto acc = [&](double snr) {
        for (const auto& row : result.summary)
            if (row.snr_target_db == snr) return row.accuracy;
        return -1.0;
    };
    CHECK(acc(5.0) <= acc(30.0) + 0.1);
    CHECK(acc(1.0) <= acc(5.0) + 0.1);
    CHECK(acc(1.0) < acc(30.0));
}

TEST_CASE("parallel_for visits every index and propagates errors") {
    std::vector<std::atomic<int>> hits(100);
    eval::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(eval::parallel_for(10, 2, [](std::size_t i) {
        if (i == 7) throw std::runtime_error("boom");
    }),
                    std::runtime_error);
}

TEST_CASE("converge_study output") {
    eval::ConvergeConfig c;
    c.seeds = 2;
    c.iterations = 3;
    c.duration = 0.5;
    c.jobs = 1;
    const auto rows = eval::converge_study(c);
    CHECK(rows.size() == 2 * 3);
    const auto csv = eval::converge_csv(rows);
    CHECK(csv.rfind("snr_db,source,iteration,correlation,median_correlation\n", 0) == 0);
    for (const auto& r : rows) {
        CHECK(r.mean_correlation <= 1.0);
        CHECK(r.mean_correlation >= -1.0);
    }
}

TEST_CASE("p2p_study is exact without noise") {
    eval::P2PConfig c;
    c.device_counts = {4, 6};
    c.noise_deg = {0.0};
    c.trials = 3;
    for (const auto& r : eval::p2p_study(c)) {
        CHECK(r.rms_error < 1e-6);
        CHECK(r.residual_rms < 1e-6);
    }
}
