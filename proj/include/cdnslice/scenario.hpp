#pragma once

// Scenario runs: a slice driven by simulated sessions and telemetry through
// monitoring, elasticity decisions and edge transcoding, with CSV and log
// artifacts.

#include "cdnslice/edm_decision.hpp"
#include "cdnslice/flavor_catalog.hpp"
#include "cdnslice/slice_manager.hpp"
#include "cdnslice/sweep.hpp"
#include "cdnslice/transcoding_ctrl.hpp"
#include "cdnslice/workload_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cdnslice {

struct WorkloadSpec {
    std::string region_id;
    double mean_duration_s = 600.0;
    double initial_sessions = 0.0;
    std::vector<RatePoint> rate;
    std::vector<RadioPoint> radio;
    int prb_budget = 50;
    std::vector<BandwidthPoint> bandwidth; // panel users' available kbps
    int panel_users = 0;
    double panel_start_s = 0.0;
    double initial_rung = 0.0; // 0: top of the ladder
};

struct TranscodingSpec {
    bool enabled = false;
    BitrateLadder ladder;
    TriggerPolicy policy;
    TranscodeTiming timing;
    int edge_vcpus = 8;
    int transcoder_vcpus = 2;
    bool cqi_seeded = false; // initial rung from the radio estimate
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    double duration_s = 600.0;
    double tick_s = 1.0;
    double report_interval_s = 10.0;
    std::optional<Catalog> catalog;
    SliceRequest slice;
    ChangeoverTiming timing;
    std::vector<WorkloadSpec> workload;
    TelemetryModel telemetry;
    ClientParams client;
    TranscodingSpec transcoding;
    EdmOptions solver;
    CqiTable cqi;
    QoeModelParams qoe;
    std::string output_dir = "out";

    void validate() const {
        if (!catalog) throw ConfigError("scenario has no catalog");
        if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
        if (!(tick_s > 0.0)) throw ConfigError("tick_s must be positive");
        if (!(report_interval_s >= tick_s)) throw ConfigError("report_interval_s must be at least tick_s");
        if (!(slice.monitoring_period_s >= tick_s)) throw ConfigError("monitoring period must be at least tick_s");
        slice.validate();
        timing.validate();
        client.validate();
        qoe.validate();
        cqi.validate();
        if (transcoding.enabled) {
            transcoding.ladder.validate();
            transcoding.policy.validate();
        }
        std::set<std::string> regions;
        for (const auto& r : slice.regions) regions.insert(r.region_id);
        std::set<std::string> seen;
        for (const auto& w : workload) {
            if (!regions.count(w.region_id)) throw ConfigError("workload for unknown region '" + w.region_id + "'");
            if (!seen.insert(w.region_id).second) throw ConfigError("duplicate workload for '" + w.region_id + "'");
            if (!(w.mean_duration_s > 0.0)) throw ConfigError("mean_duration_s must be positive");
            if (w.initial_sessions < 0.0) throw ConfigError("initial_sessions must be non-negative");
            if (w.panel_users < 0) throw ConfigError("panel_users must be non-negative");
            if (w.panel_users > 0 && w.bandwidth.empty())
                throw ConfigError("panel users in '" + w.region_id + "' need a bandwidth profile");
            for (const auto& r : w.radio)
                if (r.cqi < 1 || r.cqi > 15 || r.cell_users < 1.0)
                    throw ConfigError("radio profile out of range in '" + w.region_id + "'");
        }
    }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

using nlohmann::json;

inline void known_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void opt(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
    }
}

inline Catalog parse_catalog_spec(const json& j, const std::filesystem::path& base) {
    if (j.is_string()) return load_catalog((base / j.get<std::string>()).string(), {true, {}});
    known_keys(j, {"path", "synthetic", "clouds"}, "catalog");
    if (j.contains("path")) return load_catalog((base / j.at("path").get<std::string>()).string(), {true, {}});
    if (j.contains("clouds")) return parse_catalog(json{{"clouds", j.at("clouds")}}, {true, {}});
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        known_keys(s, {"seed", "n_clouds", "total_flavors", "capacity_vcpus"}, "catalog.synthetic");
        SyntheticCatalogParams p;
        opt(s, "seed", p.seed, "catalog.synthetic");
        opt(s, "n_clouds", p.n_clouds, "catalog.synthetic");
        opt(s, "total_flavors", p.total_flavors, "catalog.synthetic");
        opt(s, "capacity_vcpus", p.capacity_vcpus, "catalog.synthetic");
        return generate_synthetic_catalog(p);
    }
    throw ConfigError("catalog needs one of path, synthetic, clouds");
}

inline SliceRequest parse_slice(const json& j) {
    known_keys(j, {"customer_id", "duration_hours", "monitoring_period_s", "sigma", "thresholds", "regions"}, "slice");
    SliceRequest r;
    opt(j, "customer_id", r.customer_id, "slice");
    opt(j, "duration_hours", r.duration_hours, "slice");
    opt(j, "monitoring_period_s", r.monitoring_period_s, "slice");
    opt(j, "sigma", r.sigma, "slice");
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        known_keys(t, {"l_min", "l_max", "cpu_up", "ram_up", "cpu_down", "ram_down"}, "slice.thresholds");
        opt(t, "l_min", r.thresholds.l_min, "thresholds");
        opt(t, "l_max", r.thresholds.l_max, "thresholds");
        opt(t, "cpu_up", r.thresholds.cpu_up, "thresholds");
        opt(t, "ram_up", r.thresholds.ram_up, "thresholds");
        opt(t, "cpu_down", r.thresholds.cpu_down, "thresholds");
        opt(t, "ram_down", r.thresholds.ram_down, "thresholds");
    }
    if (!j.contains("regions") || !j.at("regions").is_array()) throw ConfigError("slice needs a regions array");
    for (const auto& rj : j.at("regions")) {
        known_keys(rj, {"region_id", "max_streams", "q_min", "cloud_id"}, "slice.regions[]");
        RegionRequest rr;
        opt(rj, "region_id", rr.region_id, "region");
        opt(rj, "max_streams", rr.max_streams, "region");
        opt(rj, "q_min", rr.q_min, "region");
        opt(rj, "cloud_id", rr.cloud_id, "region");
        r.regions.push_back(rr);
    }
    return r;
}

inline WorkloadSpec parse_workload(const json& j, const std::filesystem::path& base) {
    known_keys(j,
               {"region_id", "mean_duration_s", "initial_sessions", "rate", "radio", "prb_budget", "bandwidth_kbps",
                "panel_users", "panel_start_s", "initial_rung_kbps", "trace"},
               "workload[]");
    WorkloadSpec w;
    opt(j, "region_id", w.region_id, "workload");
    const std::string where = "workload '" + w.region_id + "'";
    opt(j, "mean_duration_s", w.mean_duration_s, where);
    opt(j, "initial_sessions", w.initial_sessions, where);
    opt(j, "prb_budget", w.prb_budget, where);
    opt(j, "panel_users", w.panel_users, where);
    opt(j, "panel_start_s", w.panel_start_s, where);
    opt(j, "initial_rung_kbps", w.initial_rung, where);
    for (const auto& p : j.value("rate", json::array())) {
        known_keys(p, {"t", "rate", "burst"}, where + " rate");
        RatePoint r;
        opt(p, "t", r.t, where);
        opt(p, "rate", r.rate, where);
        opt(p, "burst", r.burst, where);
        w.rate.push_back(r);
    }
    for (const auto& p : j.value("radio", json::array())) {
        known_keys(p, {"t", "cqi", "cell_users", "bw_fraction"}, where + " radio");
        RadioPoint r;
        opt(p, "t", r.t, where);
        opt(p, "cqi", r.cqi, where);
        opt(p, "cell_users", r.cell_users, where);
        opt(p, "bw_fraction", r.bw_fraction, where);
        w.radio.push_back(r);
    }
    for (const auto& p : j.value("bandwidth_kbps", json::array())) {
        known_keys(p, {"t", "kbps"}, where + " bandwidth");
        BandwidthPoint b;
        opt(p, "t", b.t, where);
        opt(p, "kbps", b.kbps, where);
        w.bandwidth.push_back(b);
    }
    std::sort(w.bandwidth.begin(), w.bandwidth.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    std::sort(w.radio.begin(), w.radio.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    if (j.contains("trace")) {
        const auto rows = load_trace((base / j.at("trace").get<std::string>()).string());
        w.rate.clear();
        w.radio.clear();
        for (const auto& row : rows) {
            if (row.region_id != w.region_id) continue;
            w.rate.push_back({row.time_s, row.arrival_rate_per_s, 0.0});
            w.radio.push_back({row.time_s, static_cast<int>(std::lround(row.mean_cell_cqi)), row.cell_users,
                               1.0 - row.background_bw_fraction});
        }
    }
    return w;
}

inline void parse_transcoding(const json& j, TranscodingSpec& t) {
    known_keys(j,
               {"enabled", "ladder_kbps", "policy", "timing", "edge_vcpus", "transcoder_vcpus", "cqi_seeded"},
               "transcoding");
    opt(j, "enabled", t.enabled, "transcoding");
    if (j.contains("ladder_kbps")) t.ladder.rungs = j.at("ladder_kbps").get<std::vector<double>>();
    opt(j, "edge_vcpus", t.edge_vcpus, "transcoding");
    opt(j, "transcoder_vcpus", t.transcoder_vcpus, "transcoding");
    opt(j, "cqi_seeded", t.cqi_seeded, "transcoding");
    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        known_keys(p,
                   {"mos_threshold", "window_samples", "sample_interval_s", "cooldown_s", "idle_terminate_s",
                    "safety_factor", "recovery_hysteresis"},
                   "transcoding.policy");
        opt(p, "mos_threshold", t.policy.mos_threshold, "policy");
        opt(p, "window_samples", t.policy.window_samples, "policy");
        opt(p, "sample_interval_s", t.policy.sample_interval_s, "policy");
        opt(p, "cooldown_s", t.policy.cooldown_s, "policy");
        opt(p, "idle_terminate_s", t.policy.idle_terminate_s, "policy");
        opt(p, "safety_factor", t.policy.safety_factor, "policy");
        opt(p, "recovery_hysteresis", t.policy.recovery_hysteresis, "policy");
    }
    if (j.contains("timing")) {
        const auto& p = j.at("timing");
        known_keys(p, {"boot_s", "transcode_ref_s", "ref_segments", "ref_vcpus", "mix_ref_s", "mix_ref_segments"},
                   "transcoding.timing");
        opt(p, "boot_s", t.timing.boot_s, "timing");
        opt(p, "transcode_ref_s", t.timing.transcode_ref_s, "timing");
        opt(p, "ref_segments", t.timing.ref_segments, "timing");
        opt(p, "ref_vcpus", t.timing.ref_vcpus, "timing");
        opt(p, "mix_ref_s", t.timing.mix_ref_s, "timing");
        opt(p, "mix_ref_segments", t.timing.mix_ref_segments, "timing");
    }
}

} // namespace detail

/// Builds a scenario from JSON. Relative file references resolve against
/// `base_dir`.
inline ScenarioConfig parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    using detail::opt;
    detail::known_keys(j,
                       {"name", "seed", "duration_s", "tick_s", "report_interval_s", "catalog", "slice", "changeover",
                        "workload", "telemetry", "client", "transcoding", "solver", "cqi_efficiency", "qoe",
                        "output_dir"},
                       "scenario");
    ScenarioConfig c;
    opt(j, "name", c.name, "scenario");
    opt(j, "seed", c.seed, "scenario");
    opt(j, "duration_s", c.duration_s, "scenario");
    opt(j, "tick_s", c.tick_s, "scenario");
    opt(j, "report_interval_s", c.report_interval_s, "scenario");
    opt(j, "output_dir", c.output_dir, "scenario");
    if (!j.contains("catalog")) throw ConfigError("scenario needs a catalog");
    c.catalog = detail::parse_catalog_spec(j.at("catalog"), base_dir);
    if (!j.contains("slice")) throw ConfigError("scenario needs a slice");
    c.slice = detail::parse_slice(j.at("slice"));
    if (j.contains("changeover")) {
        const auto& t = j.at("changeover");
        detail::known_keys(t, {"boot_delay_s", "drain_sleep_s"}, "changeover");
        opt(t, "boot_delay_s", c.timing.boot_delay, "changeover");
        opt(t, "drain_sleep_s", c.timing.drain_sleep, "changeover");
    }
    for (const auto& w : j.value("workload", nlohmann::json::array()))
        c.workload.push_back(detail::parse_workload(w, base_dir));
    if (j.contains("telemetry")) {
        const auto& t = j.at("telemetry");
        detail::known_keys(t, {"per_core_saturation", "ram_base_mb", "ram_per_session_mb"}, "telemetry");
        opt(t, "per_core_saturation", c.telemetry.per_core_saturation, "telemetry");
        opt(t, "ram_base_mb", c.telemetry.ram.base_mb, "telemetry");
        opt(t, "ram_per_session_mb", c.telemetry.ram.per_session_mb, "telemetry");
    }
    if (j.contains("client")) {
        const auto& t = j.at("client");
        detail::known_keys(t, {"segment_s", "total_segments", "startup_buffer_s", "buffer_cap_s", "mos_window_s"},
                           "client");
        opt(t, "segment_s", c.client.segment_seconds, "client");
        opt(t, "total_segments", c.client.total_segments, "client");
        opt(t, "startup_buffer_s", c.client.startup_buffer_s, "client");
        opt(t, "buffer_cap_s", c.client.buffer_cap_s, "client");
        opt(t, "mos_window_s", c.client.mos_window_s, "client");
    }
    if (j.contains("transcoding")) detail::parse_transcoding(j.at("transcoding"), c.transcoding);
    if (j.contains("solver")) {
        const auto& t = j.at("solver");
        detail::known_keys(t, {"node_limit", "exact_max_instances", "max_depth"}, "solver");
        opt(t, "node_limit", c.solver.solver.node_limit, "solver");
        opt(t, "exact_max_instances", c.solver.solver.exact_max_instances, "solver");
        opt(t, "max_depth", c.solver.max_depth, "solver");
    }
    if (j.contains("cqi_efficiency")) {
        const auto v = j.at("cqi_efficiency").get<std::vector<double>>();
        if (v.size() != 15) throw ConfigError("cqi_efficiency needs 15 entries");
        std::copy(v.begin(), v.end(), c.cqi.efficiency.begin());
    }
    if (j.contains("qoe")) {
        const auto& t = j.at("qoe");
        detail::known_keys(t, {"playout_alpha", "playout_beta"}, "qoe");
        opt(t, "playout_alpha", c.qoe.playout_alpha, "qoe");
        opt(t, "playout_beta", c.qoe.playout_beta, "qoe");
    }
    c.qoe.sigma = c.slice.sigma;
    c.validate();
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed scenario '" + path + "': " + e.what());
    }
    return parse_scenario(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Run report

struct InvariantResult {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct TriggerRecord {
    double t = 0.0;
    std::string region_id;
    TriggerKind verdict = TriggerKind::Healthy;
    std::string decision; // empty when the EDM was not consulted
};

struct JobSummary {
    std::string job_id;
    std::string region_id;
    std::string user_id;
    std::string phase;
    double source_rung = 0.0;
    double target_rung = 0.0;
    double t_trigger = 0.0;
    double t_transcode = 0.0;
    double t_mix = 0.0;
    double t_done = 0.0;
    double t_recovered = -1.0;     // mixing done and the play head on transcoded content
    double degraded_window = -1.0; // trigger to recovery
    double stall_s_after_refill = 0.0;
    double final_mos = 0.0;
};

struct RunReport {
    std::string name;
    double duration_s = 0.0;
    std::map<std::string, double> first_crossing; // region -> first time CPU or RAM crossed its up threshold
    std::vector<TriggerRecord> triggers;
    std::vector<LifecycleEvent> lifecycle;
    std::vector<DecisionRecord> decisions;
    std::vector<JobSummary> jobs;
    std::vector<InvariantResult> invariants;
    double accrued_cost = 0.0;
    std::string timeseries_csv;
    std::string decisions_log;
    std::string summary_csv;

    bool ok() const {
        return std::all_of(invariants.begin(), invariants.end(), [](const auto& i) { return i.ok; });
    }
};

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

/// Smallest value whose cumulative weight reaches `q` of the total.
inline double weighted_quantile(std::vector<std::pair<double, double>> xs, double q) {
    if (xs.empty()) return kBaseMos;
    std::sort(xs.begin(), xs.end());
    double total = 0.0;
    for (const auto& [v, w] : xs) total += w;
    if (!(total > 0.0)) return xs.front().first;
    double acc = 0.0;
    for (const auto& [v, w] : xs) {
        acc += w;
        if (acc >= q * total - 1e-12) return v;
    }
    return xs.back().first;
}

struct InvariantTracker {
    std::map<std::string, InvariantResult> results;
    std::vector<std::string> order;

    void declare(const std::string& name) {
        if (results.count(name)) return;
        results[name] = {name, true, ""};
        order.push_back(name);
    }
    void check(const std::string& name, bool ok, const std::string& detail) {
        declare(name);
        auto& r = results[name];
        if (!ok && r.ok) {
            r.ok = false;
            r.detail = detail;
        }
    }
    std::vector<InvariantResult> list() const {
        std::vector<InvariantResult> out;
        for (const auto& n : order) out.push_back(results.at(n));
        return out;
    }
};

inline bool on_grid(double t, double period, double tick) {
    const double k = std::round(t / period);
    return std::abs(t - k * period) < tick * 1e-6 + 1e-9;
}

} // namespace detail

/// One monitoring period: pushes telemetry into the slice, runs the
/// threshold precheck per region and applies EDM decisions. Regions that are
/// dormant, idle or mid-changeover are skipped.
inline std::vector<TriggerRecord> monitoring_step(SliceState& slice, const Catalog& cat, const TelemetrySample& sample,
                                                  const EdmOptions& solver, double t,
                                                  detail::InvariantTracker* inv = nullptr) {
    std::vector<TriggerRecord> out;
    const auto& thresholds = slice.request().thresholds;
    for (const auto& rid : slice.region_ids()) {
        const auto found = sample.instances.find(rid);
        if (found == sample.instances.end()) continue;
        const auto& list = found->second;
        for (const auto& x : list) slice.set_metrics(x.instance_id, x.cpu_pct, x.ram_pct, x.cpu_pct, x.probe_mos);
        if (slice.dormant(rid) || list.empty() || slice.region_sessions(rid) <= 0.0 || slice.changing(rid)) continue;
        const double q = slice.region_request(rid).q_min;
        const auto verdict = threshold_precheck(list, thresholds, q);
        TriggerRecord tr{t, rid, verdict, ""};
        if (verdict == TriggerKind::ScaleUpHint || verdict == TriggerKind::ScaleDownHint) {
            auto d = edm_step(slice.edm_input(rid), cat, slice.solve_params(rid), solver);
            d.epoch = slice.epoch(rid);
            d.trace.insert(d.trace.begin(), {"precheck", to_string(verdict)});
            if (inv && d.plan)
                inv->check("plan_mean_qoe", d.plan->avg_qoe >= q - 1e-9,
                           rid + " plan mean " + detail::fmt("%.4f", d.plan->avg_qoe) + " at t=" + detail::fmt("%.1f", t));
            const auto before = slice.epoch(rid);
            slice.apply_decision(rid, d, t);
            if (inv) inv->check("epoch_order", slice.epoch(rid) == before + 1, rid + " epoch did not advance");
            tr.decision = to_string(d.kind);
        } else if (verdict == TriggerKind::QualityNotLoad) {
            slice.note(rid, t, "QualityNotLoad", "probe MOS below target without load pressure; transcoding path");
        }
        if (verdict != TriggerKind::Healthy) out.push_back(tr);
    }
    return out;
}

/// Runs a scenario to completion. Deterministic for a given config.
inline RunReport run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const Catalog& cat = *cfg.catalog;
    RunReport rep;
    rep.name = cfg.name;
    rep.duration_s = cfg.duration_s;
    detail::InvariantTracker inv;
    for (const char* n : {"session_conservation", "service_continuity", "cost_monotone", "plan_mean_qoe",
                          "playback_accounting", "mixer_safety", "rung_monotonic_per_episode", "epoch_order"})
        inv.declare(n);

    // Instances boot before t=0 so the slice serves from the start.
    SliceState slice("slice-1", cfg.slice, cat, cfg.timing, -cfg.timing.boot_delay);
    slice.advance_to(0.0);

    std::map<std::string, const WorkloadSpec*> wl;
    for (const auto& w : cfg.workload) wl[w.region_id] = &w;

    std::map<std::string, SessionPool> pools;
    std::size_t ri = 0;
    for (const auto& rid : slice.region_ids()) {
        const auto it = wl.find(rid);
        std::vector<RatePoint> profile;
        double dur = 600.0, init = 0.0;
        if (it != wl.end()) {
            profile = it->second->rate;
            dur = it->second->mean_duration_s;
            init = it->second->initial_sessions;
        }
        SessionPool pool(profile, dur, Rng(derive_seed(cfg.seed, 100 + ri++)), 0.0);
        pool.seed(init, 0.0);
        pools.emplace(rid, std::move(pool));
    }

    auto radio_estimate = [&](const WorkloadSpec& w, double t) -> std::optional<double> {
        const auto* r = profile_at(w.radio, t);
        if (!r) return std::nullopt;
        return cqi_to_throughput(r->cqi, r->cell_users, w.prb_budget, cfg.cqi) / 1000.0 * r->bw_fraction;
    };
    auto bandwidth_at = [&](const WorkloadSpec& w, double t) {
        const auto* b = profile_at(w.bandwidth, t);
        return b ? b->kbps : 0.0;
    };

    std::map<std::string, std::map<std::string, SessionState>> panels; // region -> users
    std::map<std::string, TranscodingController> controllers;
    std::vector<std::pair<std::string, JobEvent>> job_events;
    for (const auto& rid : slice.region_ids()) {
        if (cfg.transcoding.enabled) {
            EdgeResources edge;
            edge.capacity_vcpus = cfg.transcoding.edge_vcpus;
            edge.transcoder_vcpus = cfg.transcoding.transcoder_vcpus;
            controllers.emplace(rid, TranscodingController(rid, cfg.transcoding.ladder, cfg.transcoding.policy,
                                                           cfg.transcoding.timing, cfg.client, edge, cfg.qoe));
        }
    }

    std::ostringstream ts;
    ts << "t_s,region,instances,vcpus,cost_usd_h,mos_mean,mos_p10,load_mean\n";
    std::map<std::string, std::pair<double, int>> cost_avg; // region -> (sum of hourly rate, samples)
    std::map<std::string, std::pair<double, int>> mos_avg;
    std::map<std::string, double> mos_min;
    double last_accrued = 0.0;

    const auto steps = static_cast<std::int64_t>(std::llround(cfg.duration_s / cfg.tick_s));
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * cfg.tick_s;
        const double prev = t - cfg.tick_s;
        if (k > 0) slice.advance_to(t);
        for (auto& [rid, pool] : pools) {
            if (k > 0) pool.advance(t);
            slice.route(rid, slice.dormant(rid) ? 0.0 : pool.active());
        }

        // panel users
        for (const auto& rid : slice.region_ids()) {
            const auto it = wl.find(rid);
            if (it == wl.end()) continue;
            const auto& w = *it->second;
            auto& users = panels[rid];
            if (users.empty() && w.panel_users > 0 && t >= w.panel_start_s - 1e-9) {
                for (int u = 0; u < w.panel_users; ++u) {
                    char uid[64];
                    std::snprintf(uid, sizeof uid, "%s-u%02d", rid.c_str(), u + 1);
                    double rung = w.initial_rung > 0.0 ? w.initial_rung : cfg.transcoding.ladder.rungs.front();
                    if (cfg.transcoding.cqi_seeded) {
                        if (auto est = radio_estimate(w, t)) {
                            const double cap = *est * cfg.transcoding.policy.safety_factor;
                            rung = cfg.transcoding.ladder.rungs.back();
                            for (double r : cfg.transcoding.ladder.rungs)
                                if (r <= cap) {
                                    rung = r;
                                    break;
                                }
                        }
                    }
                    users.emplace(uid, make_session(uid, rid, rung, t));
                }
            } else if (k > 0) {
                for (auto& [uid, s] : users)
                    if (!s.finished && s.clock < t - 1e-9) step_client(s, bandwidth_at(w, prev), t - s.clock, cfg.client);
            }
            for (const auto& [uid, s] : users) {
                const bool acc = s.finished || std::abs(s.play_time + s.total_stall_time + s.startup_time -
                                                        (s.clock - s.start_time)) <= 1e-6;
                inv.check("playback_accounting", acc, uid + " at t=" + detail::fmt("%.1f", t));
                inv.check("playback_accounting", s.playing_segment <= s.last_downloaded_segment,
                          uid + " plays a segment it has not downloaded");
            }
        }

        // transcoding watchdogs
        if (cfg.transcoding.enabled) {
            const auto sample = collect_telemetry(slice, cat, cfg.telemetry, cfg.slice.sigma, t);
            for (auto& [rid, ctrl] : controllers) {
                auto& users = panels[rid];
                if (users.empty()) continue;
                const auto& list = sample.instances.at(rid);
                auto instance_of = [&](const std::string&) {
                    return list.empty() ? InstanceTelemetry{} : list.front();
                };
                const WorkloadSpec* w = wl.count(rid) ? wl.at(rid) : nullptr;
                std::function<std::optional<double>(const SessionState&)> est;
                if (w && !w->radio.empty()) est = [&, w](const SessionState&) { return radio_estimate(*w, t); };
                for (auto& ev : ctrl.tick(t, users, instance_of, cfg.slice.thresholds, est))
                    job_events.push_back({rid, ev});
            }
        }

        // threshold crossings, observed every tick
        {
            const auto sample = collect_telemetry(slice, cat, cfg.telemetry, cfg.slice.sigma, t);
            for (const auto& [rid, list] : sample.instances) {
                if (rep.first_crossing.count(rid)) continue;
                for (const auto& x : list)
                    if (x.cpu_pct > cfg.slice.thresholds.cpu_up || x.ram_pct > cfg.slice.thresholds.ram_up) {
                        rep.first_crossing[rid] = t;
                        break;
                    }
            }
        }

        // monitoring period
        if (k > 0 && detail::on_grid(t, cfg.slice.monitoring_period_s, cfg.tick_s)) {
            const auto sample = collect_telemetry(slice, cat, cfg.telemetry, cfg.slice.sigma, t);
            for (auto& tr : monitoring_step(slice, cat, sample, cfg.solver, t, &inv)) rep.triggers.push_back(tr);
        }

        for (const auto& rid : slice.region_ids())
            inv.check("session_conservation", slice.sessions_conserved(rid), rid + " at t=" + detail::fmt("%.1f", t));
        inv.check("service_continuity", slice.continuity_holds(), "no serving instance at t=" + detail::fmt("%.1f", t));
        inv.check("cost_monotone", slice.accrued_cost() >= last_accrued - 1e-12, "accrued cost fell");
        last_accrued = slice.accrued_cost();

        if (detail::on_grid(t, cfg.report_interval_s, cfg.tick_s)) {
            for (const auto& rid : slice.region_ids()) {
                const auto m = slice.metrics(rid);
                std::vector<std::pair<double, double>> dist;
                double mos_w = 0.0, w_sum = 0.0;
                for (const auto* inst : slice.members(rid, Phase::Active)) {
                    const auto j = cat.flavor_index(inst->snap.current_flavor);
                    const double mos =
                        clamp_mos(mos_flavored(inst->snap.sessions, cat.flavor(j).vcpu, cat.eta(j), cfg.slice.sigma));
                    if (inst->snap.sessions > 0.0) {
                        dist.push_back({mos, inst->snap.sessions});
                        mos_w += mos * inst->snap.sessions;
                        w_sum += inst->snap.sessions;
                    }
                }
                for (const auto& [uid, s] : panels[rid]) {
                    if (!s.started || s.finished) continue;
                    const double mos = user_mos(s, cfg.qoe, cfg.client.mos_window_s);
                    dist.push_back({mos, 1.0});
                    mos_w += mos;
                    w_sum += 1.0;
                }
                const double mean = w_sum > 0.0 ? mos_w / w_sum : kBaseMos;
                const double p10 = detail::weighted_quantile(dist, 0.10);
                ts << detail::fmt("%.1f", t) << ',' << rid << ',' << m.instances << ',' << m.vcpus << ','
                   << detail::fmt("%.4f", m.cost_usd_h) << ',' << detail::fmt("%.4f", mean) << ','
                   << detail::fmt("%.4f", p10) << ',' << detail::fmt("%.2f", m.load_mean) << '\n';
                auto& ca = cost_avg[rid];
                ca.first += m.cost_usd_h;
                ++ca.second;
                auto& ma = mos_avg[rid];
                ma.first += mean;
                ++ma.second;
                mos_min[rid] = mos_min.count(rid) ? std::min(mos_min[rid], mean) : mean;
            }
        }
    }

    // job summaries and mixer/rung invariants
    for (const auto& [rid, ctrl] : controllers) {
        for (const auto& [jid, job] : ctrl.jobs()) {
            JobSummary js;
            js.job_id = jid;
            js.region_id = rid;
            js.user_id = job.user_id;
            js.phase = to_string(job.phase);
            js.source_rung = job.source_rung;
            js.target_rung = job.target_rung;
            js.t_trigger = job.t_trigger;
            js.t_transcode = job.t_transcode;
            js.t_mix = job.t_mix;
            js.t_done = job.t_done;
            const auto& users = panels.at(rid);
            const auto uit = users.find(job.user_id);
            if (job.phase == JobPhase::Done) {
                inv.check("mixer_safety", job.seg_first > job.last_downloaded_at_mix,
                          jid + " replaced an already fetched segment");
                if (uit != users.end()) {
                    const auto& s = uit->second;
                    for (int seg = 1; seg <= job.last_downloaded_at_mix && seg <= s.last_downloaded_segment; ++seg)
                        inv.check("mixer_safety",
                                  s.rung_of_segment[static_cast<std::size_t>(seg - 1)] != job.target_rung ||
                                      job.target_rung == job.source_rung,
                                  jid + " segment " + std::to_string(seg) + " fetched at the target rung before mixing");
                    // first played segment fetched at the target rung after the trigger
                    double first_play = -1.0;
                    for (std::size_t i = 0; i < s.delta_t.size() && i < s.download_done_at.size(); ++i) {
                        if (s.download_done_at[i] < job.t_trigger) continue;
                        if (s.rung_of_segment[i] != job.target_rung) continue;
                        first_play = s.download_done_at[i] + s.delta_t[i];
                        break;
                    }
                    if (first_play >= 0.0) {
                        js.t_recovered = std::max(job.t_done, first_play);
                        js.degraded_window = js.t_recovered - job.t_trigger;
                        const double from = js.t_recovered + cfg.client.buffer_cap_s;
                        for (const auto& e : s.stall_events) {
                            const double a = std::max(e.start, from), b = e.start + e.duration;
                            if (b > a) js.stall_s_after_refill += b - a;
                        }
                    }
                    js.final_mos = user_mos(s, cfg.qoe, cfg.client.mos_window_s);
                }
            }
            rep.jobs.push_back(js);
        }
        for (const auto& [uid, tr] : ctrl.tracks())
            for (std::size_t i = 1; i < tr.episode_rungs.size(); ++i)
                inv.check("rung_monotonic_per_episode", tr.episode_rungs[i] < tr.episode_rungs[i - 1],
                          uid + " rung sequence not decreasing");
    }

    rep.lifecycle = slice.lifecycle();
    rep.decisions = slice.log();
    rep.invariants = inv.list();
    rep.accrued_cost = slice.accrued_cost();
    rep.timeseries_csv = ts.str();

    // decisions.log: one line per decision record and per job event, in time order
    struct Line {
        double t;
        int kind;
        std::size_t seq;
        std::string text;
    };
    std::vector<Line> lines;
    std::size_t seq = 0;
    for (const auto& d : rep.decisions) {
        std::string s = "t=" + detail::fmt("%.1f", d.t) + " region=" + d.region_id + " epoch=" + std::to_string(d.epoch) +
                        " kind=" + d.kind + " " + d.summary;
        if (!d.trace.empty()) {
            s += " | trace:";
            for (std::size_t i = 0; i < d.trace.size(); ++i)
                s += (i ? "; " : " ") + d.trace[i].step + ": " + d.trace[i].detail;
        }
        lines.push_back({d.t, 0, seq++, s});
    }
    for (const auto& [rid, ev] : job_events) {
        std::string s = "t=" + detail::fmt("%.1f", ev.t) + " region=" + rid +
                         " job=" + (ev.job_id.empty() ? "-" : ev.job_id) + " user=" + (ev.user_id.empty() ? "-" : ev.user_id) +
                         " phase=" + to_string(ev.phase);
        if (!ev.detail.empty()) s += " " + ev.detail;
        lines.push_back({ev.t, 1, seq++, s});
    }
    std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.seq < b.seq;
    });
    std::string log;
    for (const auto& l : lines) log += l.text + "\n";
    rep.decisions_log = log;

    // summary.csv
    std::ostringstream sum;
    sum << "# monthly_usd = mean_cost_usd_h * " << static_cast<int>(kHoursPerMonth) << " (hours per month)\n";
    sum << "region,mean_cost_usd_h,monthly_usd,accrued_usd,mean_mos,min_mos,scale_outs,scale_ins,reallocations,"
           "alarms,transcode_jobs\n";
    double total_h = 0.0;
    std::map<std::string, std::map<std::string, int>> kinds;
    for (const auto& d : rep.decisions) ++kinds[d.region_id][d.kind];
    int total_jobs = 0;
    int outs = 0, ins = 0, reall = 0, alarms = 0;
    for (const auto& rid : slice.region_ids()) {
        const auto& ca = cost_avg[rid];
        const double h = ca.second ? ca.first / ca.second : 0.0;
        total_h += h;
        const auto& ma = mos_avg[rid];
        int jobs = 0;
        for (const auto& j : rep.jobs)
            if (j.region_id == rid) ++jobs;
        total_jobs += jobs;
        auto& kc = kinds[rid];
        outs += kc["ScaleOut"];
        ins += kc["ScaleIn"];
        reall += kc["Reallocate"];
        alarms += kc["Alarm"];
        sum << rid << ',' << detail::fmt("%.4f", h) << ',' << detail::fmt("%.2f", h * kHoursPerMonth) << ','
            << detail::fmt("%.6f", slice.metrics(rid).accrued_cost) << ','
            << detail::fmt("%.4f", ma.second ? ma.first / ma.second : kBaseMos) << ','
            << detail::fmt("%.4f", mos_min.count(rid) ? mos_min[rid] : kBaseMos) << ',' << kc["ScaleOut"] << ','
            << kc["ScaleIn"] << ',' << kc["Reallocate"] << ',' << kc["Alarm"] << ',' << jobs << '\n';
    }
    sum << "total," << detail::fmt("%.4f", total_h) << ',' << detail::fmt("%.2f", total_h * kHoursPerMonth) << ','
        << detail::fmt("%.6f", rep.accrued_cost) << ",,," << outs << ',' << ins << ',' << reall << ',' << alarms << ','
        << total_jobs << '\n';
    rep.summary_csv = sum.str();
    return rep;
}

/// Writes timeseries.csv, decisions.log and summary.csv into `dir`.
inline void write_outputs(const RunReport& rep, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    auto put = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out << body;
    };
    put("timeseries.csv", rep.timeseries_csv);
    put("decisions.log", rep.decisions_log);
    put("summary.csv", rep.summary_csv);
}

} // namespace cdnslice
