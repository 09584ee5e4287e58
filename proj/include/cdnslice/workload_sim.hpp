#pragma once

// Session workload, client playback, radio conditions and telemetry.

#include "cdnslice/edm_decision.hpp"
#include "cdnslice/errors.hpp"
#include "cdnslice/flavor_catalog.hpp"
#include "cdnslice/qoe_model.hpp"
#include "cdnslice/rng.hpp"
#include "cdnslice/slice_manager.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace cdnslice {

// ---------------------------------------------------------------------------
// Resource models

/// CPU percentage of `vcpus` cores serving `sessions` streams; one core
/// saturates at `per_core_saturation` streams.
inline double cpu_util_model(double sessions, int vcpus, double per_core_saturation = 6000.0) {
    if (vcpus < 1) throw ValidationError("vcpus must be >= 1");
    return std::min(100.0, 100.0 * std::max(0.0, sessions) / (per_core_saturation * vcpus));
}

struct RamModel {
    double base_mb = 150.0;
    double per_session_mb = 0.06;

    double percent(double sessions, std::int64_t ram_mb) const {
        return std::min(100.0, 100.0 * (base_mb + per_session_mb * std::max(0.0, sessions)) / static_cast<double>(ram_mb));
    }
};

/// Spectral efficiency (bits/s/Hz) per CQI index 1..15.
struct CqiTable {
    std::array<double, 15> efficiency{0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
                                      2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
    double prb_bandwidth_hz = 180e3;

    void validate() const {
        for (std::size_t i = 0; i < efficiency.size(); ++i) {
            if (!(efficiency[i] > 0.0)) throw ValidationError("CQI efficiencies must be positive");
            if (i && efficiency[i] < efficiency[i - 1]) throw ValidationError("CQI efficiencies must not decrease");
        }
    }
};

/// Per-user throughput estimate in bits/s.
inline double cqi_to_throughput(int cqi, double cell_load, int prb_budget, const CqiTable& table = {}) {
    if (cqi < 1 || cqi > 15) throw OutOfRange("CQI " + std::to_string(cqi) + " outside [1,15]");
    if (cell_load < 1.0) throw OutOfRange("cell load must be at least one user");
    return table.efficiency[static_cast<std::size_t>(cqi - 1)] * table.prb_bandwidth_hz * prb_budget / cell_load;
}

// ---------------------------------------------------------------------------
// Session arrivals

struct RatePoint {
    double t = 0.0;
    double rate = 0.0;  // arrivals per second from t on
    double burst = 0.0; // sessions that arrive at once at t
};

struct RadioPoint {
    double t = 0.0;
    int cqi = 12;
    double cell_users = 10.0;
    double bw_fraction = 1.0; // share of the radio estimate left after background traffic
};

struct BandwidthPoint {
    double t = 0.0;
    double kbps = 0.0;
};

template <typename P>
const P* profile_at(const std::vector<P>& profile, double t) {
    const P* cur = nullptr;
    for (const auto& p : profile) {
        if (p.t > t) break;
        cur = &p;
    }
    return cur;
}

/// Aggregate session population of one region.
class SessionPool {
public:
    SessionPool(std::vector<RatePoint> profile, double mean_duration_s, Rng rng, double start = 0.0)
        : profile_(std::move(profile)), mean_duration_(mean_duration_s), rng_(rng), now_(start) {
        if (!(mean_duration_s > 0.0)) throw ValidationError("mean session duration must be positive");
        std::sort(profile_.begin(), profile_.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
        for (const auto& p : profile_)
            if (p.rate < 0.0 || p.burst < 0.0) throw ValidationError("rate profile must be non-negative");
        fired_.assign(profile_.size(), false);
    }

    /// Sessions present at the start, with exponential residual lifetimes.
    void seed(double count, double now) {
        for (std::int64_t i = 0; i < std::llround(count); ++i) add(now);
    }

    /// Moves the pool to time `t`: arrivals, bursts and completions. Rates
    /// are piecewise constant, so gaps are redrawn at each breakpoint.
    void advance(double t) {
        fire_bursts();
        while (now_ < t) {
            const double seg_end = next_change_after(now_, t);
            const RatePoint* p = profile_at(profile_, now_);
            const double rate = p ? p->rate : 0.0;
            if (rate > 0.0) {
                for (double a = now_ + exponential(rng_, 1.0 / rate); a < seg_end; a += exponential(rng_, 1.0 / rate)) {
                    complete_until(a);
                    add(a);
                }
            }
            complete_until(seg_end);
            now_ = seg_end;
            fire_bursts();
        }
    }

    std::int64_t active() const noexcept { return static_cast<std::int64_t>(ends_.size()); }
    std::int64_t arrivals() const noexcept { return arrivals_; }
    std::int64_t completions() const noexcept { return completions_; }
    double now() const noexcept { return now_; }
    double current_rate() const {
        const RatePoint* p = profile_at(profile_, now_);
        return p ? p->rate : 0.0;
    }

private:
    void add(double at) {
        ++arrivals_;
        ends_.push(at + exponential(rng_, mean_duration_));
    }
    void fire_bursts() {
        for (std::size_t i = 0; i < profile_.size(); ++i) {
            if (profile_[i].t > now_ || fired_[i]) continue;
            fired_[i] = true;
            for (std::int64_t k = 0; k < std::llround(profile_[i].burst); ++k) add(now_);
        }
    }
    void complete_until(double t) {
        while (!ends_.empty() && ends_.top() <= t) {
            ends_.pop();
            ++completions_;
        }
    }
    double next_change_after(double from, double limit) const {
        for (const auto& p : profile_)
            if (p.t > from) return std::min(p.t, limit);
        return limit;
    }

    std::vector<RatePoint> profile_;
    double mean_duration_;
    Rng rng_;
    double now_ = 0.0;
    std::priority_queue<double, std::vector<double>, std::greater<>> ends_;
    std::vector<bool> fired_;
    std::int64_t arrivals_ = 0;
    std::int64_t completions_ = 0;
};

/// Draws the number of Poisson arrivals for a constant rate over a window
/// (used by the statistical tests and trace playback).
inline std::vector<double> generate_arrivals(double rate, double from, double to, Rng& rng) {
    std::vector<double> out;
    if (rate <= 0.0) return out;
    for (double t = from + exponential(rng, 1.0 / rate); t < to; t += exponential(rng, 1.0 / rate)) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// Client playback

struct ClientParams {
    double segment_seconds = 2.0;
    int total_segments = 298;
    double startup_buffer_s = 4.0;
    double buffer_cap_s = 20.0;
    double mos_window_s = 16.0;

    void validate() const {
        if (!(segment_seconds > 0.0) || total_segments < 1) throw ValidationError("invalid video layout");
        if (startup_buffer_s < 0.0 || buffer_cap_s < segment_seconds)
            throw ValidationError("buffer cap must hold at least one segment");
    }
};

struct StallEvent {
    double start = 0.0;
    double duration = 0.0;
};

struct SessionState {
    std::string user_id;
    std::string region_id;
    double current_rung = 0.0;          // kbps of the next segment to fetch
    int last_downloaded_segment = 0;    // 1-based; 0 = none yet
    int playing_segment = 0;            // 1-based; 0 = playout not started
    double buffer_level = 0.0;          // seconds of content ahead of the play head
    std::vector<StallEvent> stall_events;
    double start_time = 0.0;
    double total_stall_time = 0.0;
    double play_time = 0.0;
    double startup_time = 0.0;
    int cqi = 12;

    // in-flight download
    double inflight_kbits = 0.0;
    double inflight_rung = 0.0;
    double position = 0.0; // seconds of content played
    bool started = false;
    bool stalled = false;
    bool finished = false;
    double clock = 0.0;
    std::vector<double> download_done_at; // per segment, index = segment - 1
    std::vector<double> delta_t;          // playout start minus download completion, per started segment
    std::vector<double> rung_of_segment;  // bitrate each downloaded segment was fetched at
};

inline SessionState make_session(std::string user_id, std::string region_id, double rung_kbps, double now) {
    SessionState s;
    s.user_id = std::move(user_id);
    s.region_id = std::move(region_id);
    s.current_rung = rung_kbps;
    s.start_time = now;
    s.clock = now;
    return s;
}

/// Advances one client by `dt` seconds at a constant `available_kbps`.
/// One segment is in flight at a time; a fetch starts whenever the buffer
/// has room for another segment.
inline void step_client(SessionState& s, double available_kbps, double dt, const ClientParams& p) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    constexpr double eps = 1e-9;
    const double end = s.clock + dt;
    const double seg = p.segment_seconds;
    const double video_len = seg * p.total_segments;
    const double bw = std::max(0.0, available_kbps);

    while (s.clock < end - eps && !s.finished) {
        const bool more = s.last_downloaded_segment < p.total_segments;
        if (s.inflight_kbits <= 0.0 && more && s.buffer_level + seg <= p.buffer_cap_s + eps) {
            s.inflight_rung = s.current_rung;
            s.inflight_kbits = s.current_rung * seg;
        }
        const bool downloading = s.inflight_kbits > 0.0;
        const bool playing = s.started && !s.stalled;

        double step = end - s.clock;
        if (downloading && bw > 0.0) step = std::min(step, s.inflight_kbits / bw);
        if (playing) {
            step = std::min(step, s.buffer_level);
            step = std::min(step, (std::floor(s.position / seg + eps) + 1.0) * seg - s.position);
            if (!downloading && more) step = std::min(step, s.buffer_level + seg - p.buffer_cap_s);
        }
        step = std::max(step, 1e-12);

        if (!s.started) s.startup_time += step;
        else if (s.stalled) {
            s.total_stall_time += step;
            s.stall_events.back().duration += step;
        } else {
            s.play_time += step;
            s.position = std::min(video_len, s.position + step);
            s.buffer_level = std::max(0.0, s.buffer_level - step);
        }
        if (downloading) s.inflight_kbits -= bw * step;
        s.clock += step;

        if (downloading && s.inflight_kbits <= 1e-6) {
            s.inflight_kbits = 0.0;
            ++s.last_downloaded_segment;
            s.download_done_at.push_back(s.clock);
            s.rung_of_segment.push_back(s.inflight_rung);
            s.buffer_level += seg;
            s.stalled = false;
        }
        if (!s.started && s.buffer_level > eps &&
            (s.buffer_level >= p.startup_buffer_s - eps || s.last_downloaded_segment >= p.total_segments))
            s.started = true;
        if (!s.started) continue;

        const int head = std::min(p.total_segments, static_cast<int>(std::floor(s.position / seg + eps)) + 1);
        while (s.playing_segment < head && s.playing_segment < s.last_downloaded_segment) {
            ++s.playing_segment;
            s.delta_t.push_back(s.clock - s.download_done_at[static_cast<std::size_t>(s.playing_segment - 1)]);
        }
        if (s.position >= video_len - eps) {
            s.finished = true;
            s.buffer_level = 0.0;
        } else if (!s.stalled && s.buffer_level <= eps) {
            s.buffer_level = 0.0;
            s.stalled = true;
            s.stall_events.push_back({s.clock, 0.0});
        }
    }
    s.clock = std::max(s.clock, end);
}

/// Stall statistics over the trailing window ending at the client's clock.
inline PlayoutReport playout_window(const SessionState& s, double window_s) {
    PlayoutReport r;
    const double to = s.clock;
    const double from = std::max(s.start_time + s.startup_time, to - window_s);
    const double len = std::max(to - from, 1e-9);
    r.window_seconds = std::max(window_s, 1e-9);
    int count = 0;
    double stalled = 0.0;
    for (const auto& e : s.stall_events) {
        const double a = std::max(e.start, from);
        const double b = std::min(e.start + e.duration, to);
        if (e.start >= from && e.start <= to) ++count;
        if (b > a) stalled += b - a;
    }
    r.stall_count_per_min = count * 60.0 / window_s;
    r.stall_time_ratio = std::clamp(stalled / len, 0.0, 1.0);
    r.avg_qp = 0.0;
    return r;
}

inline double user_mos(const SessionState& s, const QoeModelParams& qp, double window_s) {
    return mos_from_playout(playout_window(s, window_s), qp);
}

// ---------------------------------------------------------------------------
// Telemetry

struct CellSample {
    std::string region_id;
    double connected_users = 0.0;
    std::array<int, 15> cqi_histogram{};
};

struct TelemetrySample {
    double t = 0.0;
    std::map<std::string, std::vector<InstanceTelemetry>> instances; // by region
    std::vector<CellSample> cells;
    std::map<std::string, double> user_mos; // panel user -> MOS
};

struct TelemetryModel {
    double per_core_saturation = 6000.0;
    RamModel ram;
};

/// Reads every Active instance of the slice: CPU from the linear model, RAM
/// affine in sessions and probe MOS from the stream-count QoE model.
inline TelemetrySample collect_telemetry(const SliceState& slice, const Catalog& catalog, const TelemetryModel& tm,
                                         double sigma, double t) {
    TelemetrySample out;
    out.t = t;
    for (const auto& region : slice.region_ids()) {
        auto& list = out.instances[region];
        for (const auto* inst : slice.members(region, Phase::Active)) {
            const std::size_t j = catalog.flavor_index(inst->snap.current_flavor);
            const auto& f = catalog.flavor(j);
            InstanceTelemetry x;
            x.instance_id = inst->snap.instance_id;
            x.session_count = inst->snap.sessions;
            x.cpu_pct = cpu_util_model(inst->snap.sessions, f.vcpu, tm.per_core_saturation);
            x.ram_pct = tm.ram.percent(inst->snap.sessions, f.ram_mb);
            x.probe_mos = mos_flavored(inst->snap.sessions, f.vcpu, catalog.eta(j), sigma);
            list.push_back(x);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trace input

struct TraceRow {
    double time_s = 0.0;
    std::string region_id;
    double arrival_rate_per_s = 0.0;
    double mean_cell_cqi = 12.0;
    double cell_users = 1.0;
    double background_bw_fraction = 0.0;
};

/// Workload trace CSV with a header naming the six columns.
inline std::vector<TraceRow> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty trace '" + path + "'");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    static const std::vector<std::string> want{"time_s", "region_id", "arrival_rate_per_s", "mean_cell_cqi",
                                               "cell_users", "background_bw_fraction"};
    if (header != want) throw ParseError("trace header must be: time_s,region_id,arrival_rate_per_s,mean_cell_cqi,cell_users,background_bw_fraction");
    std::vector<TraceRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<std::string> f;
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw ParseError("trace line " + std::to_string(lineno) + ": expected 6 fields");
        try {
            TraceRow r;
            r.time_s = std::stod(f[0]);
            r.region_id = f[1];
            r.arrival_rate_per_s = std::stod(f[2]);
            r.mean_cell_cqi = std::stod(f[3]);
            r.cell_users = std::stod(f[4]);
            r.background_bw_fraction = std::stod(f[5]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw ParseError("trace line " + std::to_string(lineno) + ": bad number");
        }
    }
    return rows;
}

} // namespace cdnslice
