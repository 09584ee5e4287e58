#include <catch_amalgamated.hpp>

#include "cdnslice/workload_sim.hpp"
#include "test_support.hpp"

#include <filesystem>
#include <fstream>

using namespace cdnslice;
using namespace cdnslice::testing;
using Catch::Approx;

TEST_CASE("CPU model calibration", "[workload][cpu]") {
    CHECK(cpu_util_model(6000, 1) == 100.0);
    CHECK(cpu_util_model(3000, 1) == 50.0);
    CHECK(cpu_util_model(0, 1) == 0.0);
    CHECK(cpu_util_model(9000, 2) == 75.0);
    CHECK(cpu_util_model(50000, 2) == 100.0);
    CHECK_THROWS_AS(cpu_util_model(10, 0), ValidationError);
}

TEST_CASE("CPU model shape", "[workload][cpu][property]") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double s = uniform_real(rng, 0, 60000);
        const double ds = uniform_real(rng, 0, 5000);
        const int c = static_cast<int>(uniform_int(rng, 1, 32));
        REQUIRE(cpu_util_model(s + ds, c) >= cpu_util_model(s, c));
        REQUIRE(cpu_util_model(s, c + 1) <= cpu_util_model(s, c));
        REQUIRE(cpu_util_model(s, c) <= 100.0);
    }
}

TEST_CASE("CQI throughput", "[workload][cqi]") {
    const CqiTable table;
    CHECK(cqi_to_throughput(15, 1, 25) == Approx(5.5547 * 180e3 * 25));
    CHECK(cqi_to_throughput(7, 4, 25) == Approx(cqi_to_throughput(7, 2, 25) / 2));
    CHECK(cqi_to_throughput(1, 1, 1) == Approx(0.1523 * 180e3));
    CHECK_THROWS_AS(cqi_to_throughput(0, 1, 25), OutOfRange);
    CHECK_THROWS_AS(cqi_to_throughput(16, 1, 25), OutOfRange);
    for (int q = 2; q <= 15; ++q) CHECK(cqi_to_throughput(q, 3, 10) > cqi_to_throughput(q - 1, 3, 10));
}

TEST_CASE("Poisson arrivals", "[workload][arrivals]") {
    Rng rng(2);
    CHECK(generate_arrivals(0.0, 0.0, 100.0, rng).empty());
    const double r = 5.0, w = 100.0;
    const int seeds = 200;
    double total = 0.0;
    for (int k = 0; k < seeds; ++k) {
        Rng g(derive_seed(77, k));
        total += static_cast<double>(generate_arrivals(r, 0.0, w, g).size());
    }
    const double mean = total / seeds;
    CHECK(std::abs(mean - r * w) < 3.0 * std::sqrt(r * w / seeds));

    // same through the pool, across breakpoints
    double pooled = 0.0;
    for (int k = 0; k < seeds; ++k) {
        SessionPool pool({{0.0, r, 0.0}, {37.0, r, 0.0}}, 1e9, Rng(derive_seed(78, k)));
        for (double t = 1.0; t <= w; t += 1.0) pool.advance(t);
        pooled += static_cast<double>(pool.arrivals());
    }
    CHECK(std::abs(pooled / seeds - r * w) < 3.0 * std::sqrt(r * w / seeds));
}

TEST_CASE("session pool surge plateau and conservation", "[workload][arrivals]") {
    const double dur = 600.0;
    SessionPool pool({{0.0, 0.0, 0.0}, {100.0, 2000.0 / dur, 2000.0}}, dur, Rng(9));
    for (double t = 1.0; t <= 4000.0; t += 1.0) {
        pool.advance(t);
        REQUIRE(pool.active() == pool.arrivals() - pool.completions());
        if (t < 100.0) REQUIRE(pool.active() == 0);
    }
    CHECK(pool.active() == Approx(2000).epsilon(0.1));
}

TEST_CASE("session pool determinism", "[workload][arrivals]") {
    auto run = [] {
        SessionPool pool({{0.0, 3.0, 10.0}}, 120.0, Rng(5));
        std::vector<std::int64_t> out;
        for (double t = 0.5; t < 300.0; t += 0.5) {
            pool.advance(t);
            out.push_back(pool.active());
        }
        return out;
    };
    CHECK(run() == run());
}

namespace {

SessionState run_client(double rung, const std::vector<std::pair<double, double>>& bw_until, const ClientParams& p,
                        double dt = 0.5) {
    auto s = make_session("u", "r", rung, 0.0);
    double t = 0.0;
    for (const auto& [until, kbps] : bw_until)
        while (t < until - 1e-9 && !s.finished) {
            step_client(s, kbps, dt, p);
            t += dt;
        }
    return s;
}

} // namespace

TEST_CASE("client with ample bandwidth never stalls", "[workload][client]") {
    ClientParams p;
    const auto s = run_client(3000, {{200.0, 30000.0}}, p);
    CHECK(s.stall_events.empty());
    CHECK(s.buffer_level >= p.buffer_cap_s - p.segment_seconds - 1e-6);
    REQUIRE(s.delta_t.size() > 10);
    CHECK(s.delta_t.back() > p.buffer_cap_s - 3 * p.segment_seconds);
}

TEST_CASE("client starved of bandwidth stalls", "[workload][client]") {
    ClientParams p;
    const auto s = run_client(5000, {{30.0, 30000.0}, {300.0, 3500.0}}, p);
    CHECK(s.stall_events.size() > 5);
    CHECK(s.delta_t.back() < 0.5);
    CHECK(s.total_stall_time > 0.0);
}

TEST_CASE("dropping the rung below the bandwidth ends stalls", "[workload][client]") {
    ClientParams p;
    auto s = make_session("u", "r", 5000, 0.0);
    for (int i = 0; i < 300; ++i) step_client(s, 3500, 0.5, p);
    REQUIRE(!s.stall_events.empty());
    s.current_rung = 3000;
    const double switched = s.clock;
    for (int i = 0; i < 200; ++i) step_client(s, 3500, 0.5, p);
    const auto& last = s.stall_events.back();
    // the in-flight segment may still be at the old rate
    CHECK(last.start + last.duration <= switched + p.startup_buffer_s + 2 * p.segment_seconds * 5000 / 3500);
    CHECK(playout_window(s, 16.0).stall_time_ratio == 0.0);
    CHECK(user_mos(s, {}, 16.0) == 5.0);
}

TEST_CASE("client playback accounting and segment monotonicity", "[workload][client][property]") {
    Rng rng(404);
    int cases = 0;
    for (int trial = 0; trial < 400; ++trial) {
        ClientParams p;
        p.total_segments = static_cast<int>(uniform_int(rng, 5, 120));
        p.segment_seconds = uniform_real(rng, 1.0, 4.0);
        p.buffer_cap_s = p.segment_seconds * uniform_real(rng, 1.0, 8.0);
        p.startup_buffer_s = uniform_real(rng, 0.0, p.buffer_cap_s);
        auto s = make_session("u", "r", uniform_real(rng, 300, 6000), 0.0);
        for (int step = 0; step < 60 && !s.finished; ++step) {
            const double dt = uniform_real(rng, 0.05, 3.0);
            const int prev_play = s.playing_segment, prev_dl = s.last_downloaded_segment;
            const double wall_before = s.clock;
            step_client(s, uniform_real(rng, 0.0, 12000.0), dt, p);
            ++cases;
            REQUIRE(s.clock == Approx(wall_before + dt));
            REQUIRE(s.playing_segment >= prev_play);
            REQUIRE(s.last_downloaded_segment >= prev_dl);
            REQUIRE(s.playing_segment <= s.last_downloaded_segment);
            REQUIRE(s.buffer_level >= 0.0);
            if (!s.finished)
                REQUIRE(s.play_time + s.total_stall_time + s.startup_time ==
                        Approx(s.clock - s.start_time).margin(1e-6));
            REQUIRE(s.play_time + s.total_stall_time <= s.clock - s.start_time - s.startup_time + 1e-6);
        }
    }
    CHECK(cases >= 10000);
}

TEST_CASE("telemetry of idle and saturated instances", "[workload][telemetry]") {
    const Catalog cat({CloudSpec{"c", "C", 8, {Flavor{"f1", "", 1, 1024, 0.05}}}});
    SliceRequest req;
    req.customer_id = "x";
    req.regions = {{"a", 6000, 4.5, ""}};
    SliceState s("s", req, cat, {0.0, 0.0}, 0.0);
    s.advance_to(0.0);
    auto idle = collect_telemetry(s, cat, {}, 0.1, 0.0);
    REQUIRE(idle.instances["a"].size() == 1);
    CHECK(idle.instances["a"][0].cpu_pct == 0.0);
    CHECK(idle.instances["a"][0].probe_mos == 5.0);
    s.route("a", 6000.0);
    auto busy = collect_telemetry(s, cat, {}, 0.1, 60.0);
    CHECK(busy.instances["a"][0].cpu_pct == 100.0);
    CHECK(busy.instances["a"][0].probe_mos == Approx(4.6234).margin(1e-4));
    CHECK(busy.instances["a"][0].ram_pct == Approx(100.0 * (150 + 0.06 * 6000) / 1024));
}

TEST_CASE("workload trace file", "[workload][trace]") {
    const auto path = std::filesystem::temp_directory_path() / "cdnslice_trace_test.csv";
    {
        std::ofstream f(path);
        f << "time_s,region_id,arrival_rate_per_s,mean_cell_cqi,cell_users,background_bw_fraction\n";
        f << "0,north,2.5,11,8,0.2\n60,north,4,9,12,0.3\n";
    }
    const auto rows = load_trace(path.string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].arrival_rate_per_s == 4.0);
    CHECK(rows[0].region_id == "north");
    {
        std::ofstream f(path);
        f << "time,region\n";
    }
    CHECK_THROWS_AS(load_trace(path.string()), ParseError);
    CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv"), IoError);
    std::filesystem::remove(path);
}
