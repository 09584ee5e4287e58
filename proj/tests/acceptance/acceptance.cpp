// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.

#include "cdnslice/control_api.hpp"
#include "cdnslice/edm_decision.hpp"
#include "cdnslice/scenario.hpp"
#include "cdnslice/sweep.hpp"
#include "cdnslice/transcoding_ctrl.hpp"
#include "../test_support.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace cdnslice;
using namespace cdnslice::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

std::string config_path(const char* name) { return std::string(CDNSLICE_CONFIG_DIR) + "/" + name; }

bool trace_has(const EdmDecision& d, const std::string& step) {
    for (const auto& e : d.trace)
        if (e.step == step) return true;
    return false;
}

// ---------------------------------------------------------------------------

Outcome qoe_exactness() {
    const auto t0 = Clock::now();
    Rng rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = uniform_real(rng, 0.0, 30000.0);
        const double want = 5.0 - 1.046e-8 * x * x;
        worst = std::max(worst, std::abs(mos_single_vcpu(x) - want));
    }
    int grid = 0, bad = 0;
    for (int k = 100; k <= 499; ++k) {
        const double q = k / 100.0;
        const auto n = max_streams_for_qoe(q);
        ++grid;
        if (!(mos_single_vcpu(static_cast<double>(n)) >= q && mos_single_vcpu(static_cast<double>(n + 1)) < q &&
              n == streams_oracle(k)))
            ++bad;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && bad == 0 && secs < 1.0,
            fmt("max |err| %.1e over 1000 points; %d/%d grid targets round-trip; %.3f s", worst, grid - bad, grid,
                secs)};
}

Outcome dimensioning() {
    auto oracle = [](std::int64_t n, int k) {
        const auto per = streams_oracle(k);
        return (n + per - 1) / per;
    };
    const auto a = required_vcpus(20000, 4.5), b = required_vcpus(6913, 4.5);
    const bool ok = a == 3 && b == 1 && a == oracle(20000, 450) && b == oracle(6913, 450);
    return {ok, fmt("(20000, 4.5) -> %lld vCPU, (6913, 4.5) -> %lld vCPU; oracle %lld / %lld",
                    static_cast<long long>(a), static_cast<long long>(b), static_cast<long long>(oracle(20000, 450)),
                    static_cast<long long>(oracle(6913, 450)))};
}

Outcome solver_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(777);
    int mismatches = 0, infeasible_flags = 0, feasible = 0, trials = 0;
    // keep drawing until 500 feasible instances have been compared; infeasible ones must agree too
    while (feasible < 500 && trials < 100000) {
        ++trials;
        const auto pr = random_small_problem(rng);
        const auto exact = solve_exact(pr.instances, pr.catalog, pr.params);
        const auto brute = solve_bruteforce(pr.instances, pr.catalog, pr.params);
        if (exact.feasible() != brute.feasible()) {
            ++mismatches;
            continue;
        }
        if (!exact.feasible()) continue;
        ++feasible;
        if (cost_ticks(exact.total_cost) != cost_ticks(brute.total_cost)) ++mismatches;
        if (!check_feasibility(exact, pr.instances, pr.catalog, pr.params).empty()) ++infeasible_flags;
        if (!check_feasibility(brute, pr.instances, pr.catalog, pr.params).empty()) ++infeasible_flags;
    }
    const double secs = seconds_since(t0);
    return {feasible >= 500 && mismatches == 0 && infeasible_flags == 0 && secs < 60.0,
            fmt("%d feasible problems (%d drawn): %d status/cost mismatches, %d referee failures; %.2f s", feasible,
                trials, mismatches, infeasible_flags, secs)};
}

Outcome scaling_decisions() {
    const Catalog cat({CloudSpec{"c", "C", 20, {Flavor{"s1", "", 1, 1024, 0.05}}}});
    SolveParams p;
    p.q_min = 4.0;
    const auto out = edm_step({instance("a", "s1", cat, 95.0, 2000.0)}, cat, p);
    const bool out_ok = out.kind == DecisionKind::ScaleOut && trace_has(out, "probe_relax_C3") && out.added.size() == 1;

    const auto in = edm_step({instance("b", "s1", cat, 15.0, 300.0), instance("a", "s1", cat, 15.0, 300.0)}, cat, p);
    const bool in_ok = in.kind == DecisionKind::ScaleIn && trace_has(in, "probe_relax_C4") && in.removed.size() == 1;

    // both probes fail: QoE target out of reach on the only flavor
    SliceRequest req;
    req.customer_id = "acc";
    req.regions = {{"a", 5000, 4.0, "c"}};
    SliceState slice("s", req, cat, {10.0, 8.0}, 0.0);
    slice.advance_to(20.0);
    slice.route("a", 5000.0);
    for (const auto* inst : slice.members("a", Phase::Active))
        slice.set_metrics(inst->snap.instance_id, 83.0, 40.0, 83.0, 4.7);
    SolveParams strict = slice.solve_params("a");
    strict.q_min = 4.99;
    auto alarm = edm_step(slice.edm_input("a"), cat, strict);
    alarm.epoch = slice.epoch("a");
    std::map<std::string, std::string> before;
    for (const auto& [id, inst] : slice.instances()) before[id] = inst.snap.current_flavor + "/" + to_string(inst.phase);
    slice.apply_decision("a", alarm, 20.0);
    slice.advance_to(60.0);
    std::map<std::string, std::string> after;
    for (const auto& [id, inst] : slice.instances()) after[id] = inst.snap.current_flavor + "/" + to_string(inst.phase);
    const bool alarm_ok = alarm.kind == DecisionKind::Alarm && !alarm.plan && alarm.added.empty() &&
                          alarm.removed.empty() && trace_has(alarm, "probe_relax_C3") &&
                          trace_has(alarm, "probe_relax_C4") && before == after && slice.log().back().kind == "Alarm";
    return {out_ok && in_ok && alarm_ok,
            fmt("over-utilized -> %s%s; under-utilized -> %s%s; both probes fail -> %s, topology %s",
                to_string(out.kind), trace_has(out, "probe_relax_C3") ? " (C3 probe)" : "", to_string(in.kind),
                trace_has(in, "probe_relax_C4") ? " (C4 probe)" : "", to_string(alarm.kind),
                before == after ? "unchanged" : "CHANGED")};
}

struct SweepRun {
    SweepResult result;
    double seconds = 0.0;
};

SweepRun run_sweep_config(const char* file) {
    std::ifstream in(config_path(file));
    auto cfg = parse_sweep_config(nlohmann::json::parse(in));
    cfg.fill_defaults();
    const auto t0 = Clock::now();
    SweepRun r{run_sweep(cfg), 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

// Per-seed ordering checked from the raw points.
int ordering_breaks(const SweepResult& r, int& compared, int& strict) {
    std::map<std::pair<int, int>, std::map<double, double>> cell;
    for (const auto& p : r.points)
        if (p.feasible) cell[{p.rep, p.size}][p.value] = p.cost_per_instance_h;
    int breaks = 0;
    for (const auto& [key, row] : cell) {
        const double* prev = nullptr;
        for (const auto& [v, c] : row) {
            if (prev) {
                ++compared;
                if (c < *prev - 1e-12) ++breaks;
                if (c > *prev + 1e-12) ++strict;
            }
            prev = &c;
        }
    }
    return breaks;
}

Outcome sweep_trends(const SweepRun& q, const SweepRun& l) {
    std::string detail;
    bool ok = true;
    for (const auto* run : {&q, &l}) {
        const auto& r = run->result;
        int compared = 0, strict = 0, infeasible = 0;
        const int breaks = ordering_breaks(r, compared, strict);
        for (const auto& p : r.points) infeasible += p.feasible ? 0 : 1;
        std::string trend;
        bool trends_ok = true;
        for (double v : r.config.values) {
            const auto t = size_trend(r, v);
            trends_ok = trends_ok && t.ok();
            trend += fmt("%s%g:%s/%zu", trend.empty() ? "" : ",", v, t.ok() ? "up" : "NOT-up", t.pressured_sizes.size());
        }
        const bool sizes_ok = r.config.sizes.size() == 30 && r.config.sizes.front() == 10 && r.config.sizes.back() == 300;
        ok = ok && breaks == 0 && trends_ok && r.config.replications >= 5 && sizes_ok && run->seconds < 600.0;
        detail += fmt("%s%s: %d/%d per-seed pairs ordered (%d strictly), %d infeasible, size trend [%s], %.0f s",
                      detail.empty() ? "" : "; ", to_string(r.config.axis), compared - breaks, compared, strict,
                      infeasible, trend.c_str(), run->seconds);
    }
    return {ok, detail};
}

Outcome solver_scaling() {
    SweepConfig cfg;
    cfg.fill_defaults();
    cfg.budget.node_limit = 200000;
    const auto cat = generate_synthetic_catalog(cfg.catalog);
    auto params = detail::sweep_params(cfg, cfg.q_min);
    auto timed = [&](int n, std::uint64_t seed, double& gap, bool& feasible) {
        const auto inst = sweep_instances(cfg, cat, n, seed);
        const auto t0 = Clock::now();
        const auto sol = solve(inst, cat, params, cfg.budget);
        const double s = seconds_since(t0);
        gap = sol.gap;
        feasible = sol.feasible();
        return s;
    };
    std::vector<double> t30, t300;
    double worst_gap = 0.0;
    bool all_feasible = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double g = 0.0;
        bool f = false;
        t30.push_back(timed(30, derive_seed(99, seed), g, f));
        all_feasible = all_feasible && f;
        t300.push_back(timed(300, derive_seed(99, seed), g, f));
        all_feasible = all_feasible && f;
        worst_gap = std::max(worst_gap, g);
    }
    std::sort(t30.begin(), t30.end());
    std::sort(t300.begin(), t300.end());
    const double m30 = t30[2], m300 = t300[2];
    const double ratio = m300 / std::max(m30, 1e-6);
    return {m300 < 60.0 && ratio <= 20.0 && all_feasible,
            fmt("median wall time n=30 %.3f s, n=300 %.3f s (p=%zu), ratio %.2f, worst reported gap %.4f, %s",
                m30, m300, cat.flavors().size(), ratio, worst_gap, all_feasible ? "all feasible" : "INFEASIBLE seen")};
}

Outcome qoe_floor(const SweepRun& q, const SweepRun& l) {
    int checked = 0, below = 0;
    for (const auto* run : {&q, &l})
        for (const auto& p : run->result.points) {
            if (!p.feasible) continue;
            ++checked;
            if (p.avg_qoe_raw < p.q_min - 1e-9) ++below;
        }
    int plans = 0, plan_below = 0;
    for (const char* f : {"load_step.json", "bandwidth_drop.json", "scale_out.json"}) {
        const auto cfg = load_scenario(config_path(f));
        const auto rep = run_scenario(cfg);
        for (const auto& inv : rep.invariants)
            if (inv.name == "plan_mean_qoe" && !inv.ok) ++plan_below;
        for (const auto& d : rep.decisions)
            if (d.kind == "Reallocate" || d.kind == "ScaleOut" || d.kind == "ScaleIn" || d.kind == "NoAction") ++plans;
    }
    return {below == 0 && plan_below == 0 && checked > 0,
            fmt("%d feasible sweep solutions, %d below Q^min; %d scenario plans, %d below Q^min", checked, below, plans,
                plan_below)};
}

Outcome elasticity_timeline() {
    const auto cfg = load_scenario(config_path("load_step.json"));
    const auto rep = run_scenario(cfg);
    if (!rep.first_crossing.count("north")) return {false, "no threshold crossing observed"};
    const double crossing = rep.first_crossing.at("north");
    const TriggerRecord* trig = nullptr;
    for (const auto& t : rep.triggers)
        if (t.region_id == "north" && t.verdict == TriggerKind::ScaleUpHint) {
            trig = &t;
            break;
        }
    if (!trig) return {false, "no ScaleUpHint"};
    int changeovers = 0;
    for (const auto& d : rep.decisions)
        if (d.kind == "Reallocate" || d.kind == "ScaleOut") ++changeovers;
    std::string old_id;
    double released = -1.0;
    for (const auto& e : rep.lifecycle)
        if (e.phase == Phase::Draining && e.t >= trig->t && old_id.empty()) old_id = e.instance_id;
    for (const auto& e : rep.lifecycle)
        if (e.instance_id == old_id && e.phase == Phase::Terminated) released = e.t;
    bool continuity = false;
    for (const auto& inv : rep.invariants)
        if (inv.name == "service_continuity") continuity = inv.ok;
    const double lag = trig->t - crossing, release = released - trig->t;
    const bool ok = lag >= 0.0 && lag <= cfg.slice.monitoring_period_s && released >= 0.0 && release >= 15.0 &&
                    release <= 20.0 && continuity && changeovers == 1;
    return {ok, fmt("crossing t=%.0f s, ScaleUpHint t=%.0f s (lag %.0f s), %s released %.0f s after trigger, "
                    "%d changeover, continuity %s",
                    crossing, trig->t, lag, old_id.c_str(), release, changeovers, continuity ? "held" : "BROKEN")};
}

Outcome transcoding_timeline() {
    const auto cfg = load_scenario(config_path("bandwidth_drop.json"));
    const auto rep = run_scenario(cfg);
    if (rep.jobs.size() != 1) return {false, fmt("%zu jobs", rep.jobs.size())};
    const auto& j = rep.jobs.front();
    const bool anchors = cfg.transcoding.timing.boot_s == 3.0 && cfg.transcoding.timing.transcode_ref_s == 70.0 &&
                         cfg.transcoding.timing.mix_ref_s == 26.0;
    const bool ok = anchors && j.phase == "Done" && j.degraded_window >= 86.0 && j.degraded_window <= 106.0 &&
                    j.stall_s_after_refill == 0.0 && j.final_mos > 3.5;
    return {ok, fmt("trigger t=%.1f, boot %.1f s, transcode %.1f s, mix %.1f s, recovered t=%.1f: window %.1f s; "
                    "stall after refill %.1f s; final MOS %.2f (%g->%g kbps)",
                    j.t_trigger, j.t_transcode - j.t_trigger, j.t_mix - j.t_transcode, j.t_done - j.t_mix,
                    j.t_recovered, j.degraded_window, j.stall_s_after_refill, j.final_mos, j.source_rung,
                    j.target_rung)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "cdnslice_acceptance";
    fs::remove_all(root);
    int files = 0, diffs = 0;
    for (const char* f : {"load_step.json", "bandwidth_drop.json", "scale_out.json"}) {
        const auto cfg = load_scenario(config_path(f));
        write_outputs(run_scenario(cfg), root / f / "a");
        write_outputs(run_scenario(cfg), root / f / "b");
        for (const char* name : {"timeseries.csv", "decisions.log", "summary.csv"}) {
            ++files;
            const auto a = slurp(root / f / "a" / name), b = slurp(root / f / "b" / name);
            if (a != b || a.empty()) ++diffs;
        }
    }
    fs::remove_all(root);
    return {diffs == 0, fmt("3 scenarios x 2 runs: %d/%d output files byte-identical", files - diffs, files)};
}

// Invariant suites -----------------------------------------------------------

int mixer_safety_cases(int& violations) {
    Rng rng(4242);
    const TranscodeTiming timing;
    int cases = 0;
    for (int trial = 0; cases < 10000 && trial < 40000; ++trial) {
        ClientParams client;
        client.total_segments = static_cast<int>(uniform_int(rng, 10, 300));
        EdgeResources edge;
        auto u = make_session("u", "r", 5000, 0.0);
        const double trigger = uniform_real(rng, 0.0, 40.0);
        const double bw = uniform_real(rng, 1000.0, 20000.0);
        double t = 0.0;
        while (t < trigger) {
            step_client(u, bw, 1.0, client);
            t += 1.0;
        }
        if (u.finished) continue;
        auto job = start_job(u, 3000, client, edge, timing, t, "j");
        bool mixed = false;
        for (int k = 0; k < 300 && job.active(); ++k) {
            step_client(u, bw, 1.0, client);
            t += 1.0;
            const int fetched = u.last_downloaded_segment;
            const auto phase = job.phase;
            advance_job(job, t, &u, edge, timing, client);
            if (phase != JobPhase::Mixing && job.phase == JobPhase::Mixing) {
                mixed = true;
                if (!(job.seg_first > fetched && job.seg_first == job.last_downloaded_at_mix + 1)) ++violations;
                // no already-fetched segment may carry the new rung
                for (int s = 1; s <= fetched; ++s)
                    if (u.rung_of_segment[static_cast<std::size_t>(s - 1)] == 3000.0) ++violations;
            }
            if (u.playing_segment > u.last_downloaded_segment) ++violations;
        }
        if (mixed) ++cases;
    }
    return cases;
}

int conservation_cases(int& violations) {
    const Catalog cat({CloudSpec{"east", "E", 64,
                                 {Flavor{"e1", "", 1, 1024, 0.01}, Flavor{"e2", "", 2, 2048, 0.02},
                                  Flavor{"e4", "", 4, 4096, 0.04}}}});
    Rng rng(9090);
    int cases = 0;
    while (cases < 10000) {
        SliceRequest req;
        req.customer_id = "acc";
        req.regions = {{"a", static_cast<std::int64_t>(uniform_int(rng, 1000, 30000)), 4.0, "east"}};
        SliceState s("s", req, cat, {uniform_real(rng, 0.0, 15.0), uniform_real(rng, 0.0, 10.0)}, -20.0);
        double t = 0.0;
        s.advance_to(t);
        for (int step = 0; step < 25; ++step) {
            t += uniform_real(rng, 1.0, 40.0);
            s.advance_to(t);
            s.route("a", uniform_real(rng, 0.0, 40000.0));
            ++cases;
            if (!s.sessions_conserved("a") || !s.continuity_holds()) ++violations;
            if (s.changing("a")) continue;
            const auto active = s.members("a", Phase::Active);
            EdmDecision d;
            d.kind = static_cast<DecisionKind>(uniform_int(rng, 0, 4));
            d.epoch = s.epoch("a");
            AssignmentSolution plan;
            plan.status = SolveStatus::Optimal;
            for (const auto* inst : active)
                plan.assignment[inst->snap.instance_id] = cat.flavor(static_cast<std::size_t>(uniform_int(rng, 0, 2))).id;
            if (d.kind == DecisionKind::ScaleOut) {
                InstanceSnapshot f;
                f.instance_id = std::string(kNewInstancePrefix) + "1";
                f.current_flavor = "e1";
                f.cloud_id = "east";
                d.added.push_back(f);
                plan.assignment[f.instance_id] = "e1";
            }
            if (d.kind == DecisionKind::ScaleIn && active.size() > 1)
                d.removed.push_back(
                    active[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(active.size()) - 1))]
                        ->snap.instance_id);
            if (d.kind == DecisionKind::ScaleIn && d.removed.empty()) d.kind = DecisionKind::NoAction;
            if (d.kind != DecisionKind::Alarm && d.kind != DecisionKind::NoAction) d.plan = plan;
            s.apply_decision("a", d, t);
            ++cases;
            if (!s.sessions_conserved("a") || !s.continuity_holds()) ++violations;
        }
    }
    return cases;
}

int accounting_cases(int& violations) {
    Rng rng(5150);
    int cases = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        ClientParams p;
        p.total_segments = static_cast<int>(uniform_int(rng, 5, 120));
        p.segment_seconds = uniform_real(rng, 1.0, 4.0);
        p.buffer_cap_s = p.segment_seconds * uniform_real(rng, 1.0, 8.0);
        p.startup_buffer_s = uniform_real(rng, 0.0, p.buffer_cap_s);
        auto s = make_session("u", "r", uniform_real(rng, 300, 6000), 0.0);
        for (int step = 0; step < 40 && !s.finished; ++step) {
            const int play = s.playing_segment, dl = s.last_downloaded_segment;
            step_client(s, uniform_real(rng, 0.0, 12000.0), uniform_real(rng, 0.05, 3.0), p);
            if (s.playing_segment < play || s.last_downloaded_segment < dl || s.playing_segment > s.last_downloaded_segment ||
                s.buffer_level < 0.0)
                ++violations;
            if (!s.finished &&
                std::abs(s.play_time + s.total_stall_time + s.startup_time - (s.clock - s.start_time)) > 1e-6)
                ++violations;
        }
        ++cases;
    }
    return cases;
}

int eta_cases(int& violations) {
    Rng rng(6060);
    int cases = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        SyntheticCatalogParams p;
        p.seed = rng();
        p.n_clouds = static_cast<int>(uniform_int(rng, 1, 4));
        p.total_flavors = p.n_clouds + static_cast<int>(uniform_int(rng, 0, 24));
        const auto cat = generate_synthetic_catalog(p);
        for (const auto& cloud : cat.clouds()) {
            double lo = 1e300, hi = -1e300, emin = 2.0, emax = -1.0;
            for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
                const double e = cat.eta(j);
                if (!(e >= 0.0 && e <= 1.0)) ++violations;
                lo = std::min(lo, cat.flavor(j).cost_per_hour);
                hi = std::max(hi, cat.flavor(j).cost_per_hour);
                emin = std::min(emin, e);
                emax = std::max(emax, e);
                for (std::size_t k = cloud.first; k <= cloud.last; ++k)
                    if (cat.flavor(j).cost_per_hour < cat.flavor(k).cost_per_hour && !(e <= cat.eta(k))) ++violations;
            }
            if (hi > lo && (emin != 0.0 || emax != 1.0)) ++violations;
        }
        ++cases;
    }
    return cases;
}

int rung_cases(int& violations) {
    Rng rng(7070);
    const ScalingThresholds th;
    int cases = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        ClientParams client;
        client.total_segments = 60;
        TriggerPolicy pol;
        pol.cooldown_s = uniform_real(rng, 0.0, 30.0);
        TranscodeTiming timing;
        timing.transcode_ref_s = uniform_real(rng, 1.0, 30.0);
        timing.mix_ref_s = uniform_real(rng, 1.0, 10.0);
        timing.boot_s = uniform_real(rng, 0.0, 3.0);
        TranscodingController ctl("r", {}, pol, timing, client, {});
        std::map<std::string, SessionState> users;
        users.emplace("u", make_session("u", "r", 5000, 0.0));
        const double bw = uniform_real(rng, 300.0, 6000.0);
        for (double t = 1.0; t <= 130.0; t += 1.0) {
            step_client(users.at("u"), bw, 1.0, client);
            ctl.tick(t, users, [](const std::string&) { return InstanceTelemetry{"i", 30, 40, 1, 5}; }, th);
        }
        for (const auto& [uid, tr] : ctl.tracks())
            for (std::size_t i = 1; i < tr.episode_rungs.size(); ++i)
                if (!(tr.episode_rungs[i] < tr.episode_rungs[i - 1])) ++violations;
        ++cases;
    }
    return cases;
}

Outcome invariant_suites() {
    struct Suite {
        const char* name;
        std::function<int(int&)> run;
    };
    const Suite suites[] = {{"mixer safety", mixer_safety_cases},
                            {"session conservation", conservation_cases},
                            {"playback accounting", accounting_cases},
                            {"eta bounds", eta_cases},
                            {"rung monotonicity", rung_cases}};
    bool ok = true;
    std::string detail;
    for (const auto& s : suites) {
        int violations = 0;
        const auto t0 = Clock::now();
        const int cases = s.run(violations);
        ok = ok && cases >= 10000 && violations == 0;
        detail += fmt("%s%s %d cases/%d violations (%.1f s)", detail.empty() ? "" : "; ", s.name, cases, violations,
                      seconds_since(t0));
    }
    return {ok, detail};
}

} // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* title, const Outcome& o) {
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << title << ": " << o.detail << std::endl;
        if (!o.pass) ++failed;
    };
    auto guarded = [&](auto&& fn) -> Outcome {
        try {
            return fn();
        } catch (const std::exception& e) {
            return {false, std::string("exception: ") + e.what()};
        }
    };

    report(1, "QoE model exactness", guarded(qoe_exactness));
    report(2, "vCPU dimensioning", guarded(dimensioning));
    report(3, "exact solver equals enumeration oracle", guarded(solver_equivalence));
    report(4, "relaxation-driven scaling decisions", guarded(scaling_decisions));

    SweepRun q, l;
    Outcome sweeps;
    try {
        q = run_sweep_config("sweep_qmin.json");
        l = run_sweep_config("sweep_lmin.json");
        sweeps = sweep_trends(q, l);
    } catch (const std::exception& e) {
        sweeps = {false, std::string("exception: ") + e.what()};
    }
    report(5, "cost ordering and size trend across sweeps", sweeps);
    report(6, "solver scaling budget", guarded(solver_scaling));
    report(7, "mean slice QoE never below target", guarded([&] { return qoe_floor(q, l); }));
    report(8, "load-step elasticity timeline", guarded(elasticity_timeline));
    report(9, "bandwidth-drop transcoding timeline", guarded(transcoding_timeline));
    report(10, "byte-identical outputs per seed", guarded(determinism));
    report(11, "randomized invariant suites", guarded(invariant_suites));

    std::cout << (failed == 0 ? "all 11 criteria passed" : std::to_string(failed) + " of 11 criteria failed")
              << std::endl;
    return failed == 0 ? 0 : 1;
}
