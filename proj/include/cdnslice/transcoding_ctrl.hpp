#pragma once

// Per-user QoE watchdog and stepwise bitrate reduction through edge
// transcoders and a segment mixer.

#include "cdnslice/edm_decision.hpp"
#include "cdnslice/errors.hpp"
#include "cdnslice/qoe_model.hpp"
#include "cdnslice/workload_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace cdnslice {

struct BitrateLadder {
    std::vector<double> rungs{5000.0, 3000.0, 1500.0, 800.0}; // kbps, strictly decreasing

    void validate() const {
        if (rungs.size() < 2) throw ValidationError("ladder needs at least two rungs");
        for (std::size_t i = 1; i < rungs.size(); ++i)
            if (!(rungs[i] < rungs[i - 1])) throw ValidationError("ladder rungs must strictly decrease");
        if (!(rungs.back() > 0.0)) throw ValidationError("ladder rungs must be positive");
    }
    std::size_t index_of(double kbps) const {
        for (std::size_t i = 0; i < rungs.size(); ++i)
            if (rungs[i] == kbps) return i;
        throw OutOfRange("bitrate " + std::to_string(kbps) + " is not on the ladder");
    }
    bool lowest(double kbps) const { return index_of(kbps) + 1 == rungs.size(); }
};

struct TriggerPolicy {
    double mos_threshold = 3.5;
    int window_samples = 4;
    double sample_interval_s = 2.0;
    double cooldown_s = 60.0;
    double idle_terminate_s = 120.0;
    double safety_factor = 0.8;
    double recovery_hysteresis = 0.3;

    void validate() const {
        if (!(mos_threshold > 1.0 && mos_threshold < 5.0)) throw ValidationError("MOS threshold must lie in (1,5)");
        if (window_samples < 1) throw ValidationError("window needs at least one sample");
        if (cooldown_s < 0.0 || idle_terminate_s < 0.0) throw ValidationError("cooldown and idle timeout must be >= 0");
        if (!(sample_interval_s > 0.0)) throw ValidationError("sample interval must be positive");
        if (!(safety_factor > 0.0 && safety_factor <= 1.0)) throw ValidationError("safety factor must lie in (0,1]");
    }
};

struct TriggerVerdict {
    bool fire = false;
    std::string reason;
};

/// Transcode only for a low window average on an instance that is not
/// itself overloaded, outside the cooldown and above the bottom rung.
inline TriggerVerdict should_transcode(const std::vector<double>& mos_window, const InstanceTelemetry& instance,
                                       const ScalingThresholds& thresholds, const TriggerPolicy& policy,
                                       std::optional<double> last_trigger, double now, bool at_lowest_rung) {
    if (mos_window.empty()) throw ValidationError("empty MOS window");
    const double mean = std::accumulate(mos_window.begin(), mos_window.end(), 0.0) / mos_window.size();
    char buf[64];
    std::snprintf(buf, sizeof buf, "window mean %.3f", mean);
    if (mean >= policy.mos_threshold) return {false, std::string(buf) + " above threshold"};
    if (instance.cpu_pct > thresholds.cpu_up || instance.ram_pct > thresholds.ram_up)
        return {false, std::string(buf) + " but instance overloaded; elasticity path"};
    if (last_trigger && now - *last_trigger < policy.cooldown_s) return {false, std::string(buf) + " within cooldown"};
    if (at_lowest_rung) return {false, std::string(buf) + " at lowest rung"};
    return {true, std::string(buf) + " below threshold"};
}

/// Next lower rung, or with a throughput estimate the highest rung under
/// estimate·safety_factor, never above one step down.
inline double select_target_rung(double current, const BitrateLadder& ladder, std::optional<double> estimate_kbps,
                                 double safety_factor = 0.8) {
    const std::size_t i = ladder.index_of(current);
    if (i + 1 == ladder.rungs.size()) throw AlreadyLowest("already at the lowest rung " + std::to_string(current));
    std::size_t pick = i + 1;
    if (estimate_kbps) {
        const double cap = *estimate_kbps * safety_factor;
        while (pick + 1 < ladder.rungs.size() && ladder.rungs[pick] > cap) ++pick;
    }
    return ladder.rungs[pick];
}

struct TranscodeTiming {
    double boot_s = 3.0;
    double transcode_ref_s = 70.0;
    int ref_segments = 298;
    int ref_vcpus = 2;
    double mix_ref_s = 26.0;
    int mix_ref_segments = 298;

    double transcode_seconds(int segments, int vcpus) const {
        return transcode_ref_s * (static_cast<double>(segments) / ref_segments) *
               (static_cast<double>(ref_vcpus) / vcpus);
    }
    double mix_seconds(int segments) const {
        return mix_ref_s * static_cast<double>(segments) / mix_ref_segments;
    }
};

enum class JobPhase { Booting, Transcoding, Mixing, Done, Cancelled };

inline const char* to_string(JobPhase p) noexcept {
    switch (p) {
    case JobPhase::Booting: return "Booting";
    case JobPhase::Transcoding: return "Transcoding";
    case JobPhase::Mixing: return "Mixing";
    case JobPhase::Done: return "Done";
    case JobPhase::Cancelled: return "Cancelled";
    }
    return "?";
}

struct TranscodeJob {
    std::string job_id;
    std::string user_id;
    std::string transcoder_id;
    double source_rung = 0.0;
    double target_rung = 0.0;
    JobPhase phase = JobPhase::Booting;
    double t_trigger = 0.0;
    double t_transcode = 0.0; // transcoding starts
    double t_mix = 0.0;       // mixing starts (scheduled)
    double t_done = 0.0;      // scheduled end of mixing
    int remaining_segments = 0;
    int seg_first = 0; // replaced range, fixed at mix start
    int seg_last = 0;
    int transcoder_vcpus = 2;
    int last_downloaded_at_mix = 0;

    bool active() const noexcept { return phase != JobPhase::Done && phase != JobPhase::Cancelled; }
    /// Highest segment already swapped in by the mixer at `now`.
    int replaced_through(double now) const {
        if (phase != JobPhase::Mixing && phase != JobPhase::Done) return seg_first - 1;
        if (phase == JobPhase::Done || t_done <= t_mix) return seg_last;
        const double frac = std::clamp((now - t_mix) / (t_done - t_mix), 0.0, 1.0);
        const int count = seg_last - seg_first + 1;
        return seg_first - 1 + static_cast<int>(std::floor(frac * count + 1e-9));
    }
};

struct JobEvent {
    double t = 0.0;
    std::string job_id;
    std::string user_id;
    JobPhase phase = JobPhase::Booting;
    std::string detail;
};

struct TranscoderInstance {
    std::string id;
    int vcpus = 2;
    bool busy = false;
    double idle_since = 0.0;
    bool terminated = false;
};

/// Edge host vCPU pool for transcoders.
struct EdgeResources {
    int capacity_vcpus = 8;
    int transcoder_vcpus = 2;
    std::vector<TranscoderInstance> transcoders;
    int counter = 0;

    int used() const {
        int u = 0;
        for (const auto& t : transcoders)
            if (!t.terminated) u += t.vcpus;
        return u;
    }
};

/// Schedules a job. An idle transcoder is reused without a boot delay.
inline TranscodeJob start_job(const SessionState& user, double target_rung, const ClientParams& client,
                              EdgeResources& edge, const TranscodeTiming& timing, double now,
                              const std::string& job_id) {
    TranscoderInstance* worker = nullptr;
    for (auto& t : edge.transcoders)
        if (!t.terminated && !t.busy) {
            worker = &t;
            break;
        }
    bool fresh = false;
    if (!worker) {
        if (edge.used() + edge.transcoder_vcpus > edge.capacity_vcpus)
            throw ResourceUnavailable("edge host lacks " + std::to_string(edge.transcoder_vcpus) +
                                      " vCPUs for a transcoder");
        char buf[32];
        std::snprintf(buf, sizeof buf, "tc-%03d", ++edge.counter);
        edge.transcoders.push_back({buf, edge.transcoder_vcpus, false, now, false});
        worker = &edge.transcoders.back();
        fresh = true;
    }
    worker->busy = true;

    TranscodeJob job;
    job.job_id = job_id;
    job.user_id = user.user_id;
    job.transcoder_id = worker->id;
    job.source_rung = user.current_rung;
    job.target_rung = target_rung;
    job.t_trigger = now;
    job.transcoder_vcpus = worker->vcpus;
    job.remaining_segments = std::max(0, client.total_segments - user.last_downloaded_segment);
    job.t_transcode = now + (fresh ? timing.boot_s : 0.0);
    job.t_mix = job.t_transcode + timing.transcode_seconds(job.remaining_segments, job.transcoder_vcpus);
    job.phase = fresh ? JobPhase::Booting : JobPhase::Transcoding;
    return job;
}

/// Moves a job through its phases up to `now`, applying mixer effects to the
/// user: the effective rung drops once the next segment to fetch has been
/// replaced.
inline std::vector<JobEvent> advance_job(TranscodeJob& job, double now, SessionState* user, EdgeResources& edge,
                                         const TranscodeTiming& timing, const ClientParams& client) {
    std::vector<JobEvent> out;
    auto release = [&](double t) {
        for (auto& w : edge.transcoders)
            if (w.id == job.transcoder_id) {
                w.busy = false;
                w.idle_since = t;
            }
    };
    if (!job.active()) return out;
    if (user == nullptr || user->finished) {
        job.phase = JobPhase::Cancelled;
        release(now);
        out.push_back({now, job.job_id, job.user_id, JobPhase::Cancelled, "user left"});
        return out;
    }
    if (job.phase == JobPhase::Booting && now >= job.t_transcode) {
        job.phase = JobPhase::Transcoding;
        out.push_back({job.t_transcode, job.job_id, job.user_id, JobPhase::Transcoding,
                       std::to_string(job.remaining_segments) + " segments on " + std::to_string(job.transcoder_vcpus) +
                           " vCPUs"});
    }
    if (job.phase == JobPhase::Transcoding && now >= job.t_mix) {
        job.phase = JobPhase::Mixing;
        job.last_downloaded_at_mix = user->last_downloaded_segment;
        job.seg_first = user->last_downloaded_segment + 1;
        job.seg_last = client.total_segments;
        const int count = std::max(0, job.seg_last - job.seg_first + 1);
        job.t_done = job.t_mix + timing.mix_seconds(count);
        out.push_back({job.t_mix, job.job_id, job.user_id, JobPhase::Mixing,
                       "replace " + std::to_string(job.seg_first) + ".." + std::to_string(job.seg_last)});
    }
    if (job.phase == JobPhase::Mixing) {
        const int next = user->last_downloaded_segment + 1;
        if (job.replaced_through(now) >= next || now >= job.t_done) user->current_rung = job.target_rung;
        if (now >= job.t_done) {
            job.phase = JobPhase::Done;
            user->current_rung = job.target_rung;
            release(job.t_done);
            out.push_back({job.t_done, job.job_id, job.user_id, JobPhase::Done, ""});
        }
    }
    return out;
}

/// Releases transcoders idle for at least the policy's timeout.
inline std::vector<std::string> maybe_terminate_transcoders(EdgeResources& edge, const TriggerPolicy& policy,
                                                             double now) {
    std::vector<std::string> out;
    for (auto& t : edge.transcoders)
        if (!t.terminated && !t.busy && now - t.idle_since >= policy.idle_terminate_s) {
            t.terminated = true;
            out.push_back(t.id);
        }
    return out;
}

// ---------------------------------------------------------------------------

/// One region's watchdog: samples per-user MOS, runs the trigger gate and
/// drives jobs and their user effects.
class TranscodingController {
public:
    TranscodingController(std::string region, BitrateLadder ladder, TriggerPolicy policy, TranscodeTiming timing,
                          ClientParams client, EdgeResources edge, QoeModelParams qoe = {})
        : region_(std::move(region)), ladder_(std::move(ladder)), policy_(policy), timing_(timing), client_(client),
          edge_(std::move(edge)), qoe_(qoe) {
        ladder_.validate();
        policy_.validate();
        client_.validate();
    }

    struct UserTrack {
        std::vector<double> window;
        std::optional<double> last_trigger;
        std::vector<double> episode_rungs; // rungs entered in the current degradation episode
        bool in_episode = false;
        double last_sample = -1e300;
    };

    /// Called every tick. `instance_of` gives the telemetry of the instance
    /// serving the user; `estimate_kbps` an optional radio estimate.
    std::vector<JobEvent> tick(double now, std::map<std::string, SessionState>& users,
                               const std::function<InstanceTelemetry(const std::string&)>& instance_of,
                               const ScalingThresholds& thresholds,
                               const std::function<std::optional<double>(const SessionState&)>& estimate_kbps = {}) {
        std::vector<JobEvent> events;
        for (auto& [jid, job] : jobs_) {
            if (!job.active()) continue;
            auto it = users.find(job.user_id);
            auto ev = advance_job(job, now, it == users.end() ? nullptr : &it->second, edge_, timing_, client_);
            if (job.phase == JobPhase::Done && it != users.end()) {
                auto& tr = tracks_[job.user_id];
                tr.window.clear();
                tr.last_sample = -1e300;
            }
            events.insert(events.end(), ev.begin(), ev.end());
        }
        for (const auto& id : maybe_terminate_transcoders(edge_, policy_, now))
            events.push_back({now, "", "", JobPhase::Done, "terminate " + id});

        for (auto& [uid, user] : users) {
            if (user.finished || !user.started) continue;
            auto& tr = tracks_[uid];
            if (now - tr.last_sample < policy_.sample_interval_s - 1e-9) continue;
            tr.last_sample = now;
            tr.window.push_back(user_mos(user, qoe_, client_.mos_window_s));
            if (static_cast<int>(tr.window.size()) > policy_.window_samples) tr.window.erase(tr.window.begin());
            if (static_cast<int>(tr.window.size()) < policy_.window_samples) continue;
            const double mean = std::accumulate(tr.window.begin(), tr.window.end(), 0.0) / tr.window.size();

            if (tr.in_episode && !has_active_job(uid) && mean >= policy_.mos_threshold + policy_.recovery_hysteresis) {
                tr.in_episode = false;
                tr.episode_rungs.clear();
            }
            if (has_active_job(uid)) continue;
            const auto verdict = should_transcode(tr.window, instance_of(uid), thresholds, policy_, tr.last_trigger,
                                                  now, ladder_.lowest(user.current_rung));
            if (!verdict.fire) continue;
            std::optional<double> est;
            if (estimate_kbps) est = estimate_kbps(user);
            const double target = select_target_rung(user.current_rung, ladder_, est, policy_.safety_factor);
            char jid[48];
            std::snprintf(jid, sizeof jid, "%s-job%03d", region_.c_str(), ++job_counter_);
            TranscodeJob job;
            try {
                job = start_job(user, target, client_, edge_, timing_, now, jid);
            } catch (const ResourceUnavailable& e) {
                events.push_back({now, jid, uid, JobPhase::Cancelled, e.what()});
                tr.last_trigger = now;
                continue;
            }
            tr.last_trigger = now;
            if (!tr.in_episode) {
                tr.in_episode = true;
                tr.episode_rungs = {user.current_rung};
            }
            tr.episode_rungs.push_back(target);
            char detail[160];
            std::snprintf(detail, sizeof detail, "%s; %.0f->%.0f kbps on %s", verdict.reason.c_str(), job.source_rung,
                          job.target_rung, job.transcoder_id.c_str());
            events.push_back({now, job.job_id, uid, JobPhase::Booting, detail});
            jobs_[job.job_id] = job;
            // a reused transcoder starts immediately
            auto ev = advance_job(jobs_[job.job_id], now, &user, edge_, timing_, client_);
            events.insert(events.end(), ev.begin(), ev.end());
        }
        return events;
    }

    bool has_active_job(const std::string& user) const {
        for (const auto& [id, j] : jobs_)
            if (j.user_id == user && j.active()) return true;
        return false;
    }
    const std::map<std::string, TranscodeJob>& jobs() const noexcept { return jobs_; }
    const std::map<std::string, UserTrack>& tracks() const noexcept { return tracks_; }
    const EdgeResources& edge() const noexcept { return edge_; }
    const BitrateLadder& ladder() const noexcept { return ladder_; }

private:
    std::string region_;
    BitrateLadder ladder_;
    TriggerPolicy policy_;
    TranscodeTiming timing_;
    ClientParams client_;
    EdgeResources edge_;
    QoeModelParams qoe_;
    std::map<std::string, TranscodeJob> jobs_;
    std::map<std::string, UserTrack> tracks_;
    int job_counter_ = 0;
};

} // namespace cdnslice
