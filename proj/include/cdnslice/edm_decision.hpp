#pragma once

// Elasticity decisions: the threshold pre-check on instance telemetry and the
// relaxation-driven decision step that turns an infeasible flavor assignment
// into scale-out / scale-in actions.

#include "cdnslice/edm_solvers.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cdnslice {

struct ScalingThresholds {
    double l_min = 25.0;
    double l_max = 90.0;
    double cpu_up = 90.0;
    double ram_up = 90.0;
    double cpu_down = 25.0;
    double ram_down = 65.0;

    void validate() const {
        if (!(l_min >= 0.0 && l_min < l_max && l_max <= 100.0))
            throw ValidationError("thresholds need 0 <= l_min < l_max <= 100");
        if (!(cpu_down < cpu_up && ram_down < ram_up)) throw ValidationError("down thresholds must be below up thresholds");
    }
};

/// Resource usage and probe MOS of one instance over a monitoring period.
struct InstanceTelemetry {
    std::string instance_id;
    double cpu_pct = 0.0;
    double ram_pct = 0.0;
    double session_count = 0.0;
    double probe_mos = kBaseMos;
};

enum class TriggerKind { ScaleUpHint, ScaleDownHint, QualityNotLoad, Healthy };

inline const char* to_string(TriggerKind k) noexcept {
    switch (k) {
    case TriggerKind::ScaleUpHint: return "ScaleUpHint";
    case TriggerKind::ScaleDownHint: return "ScaleDownHint";
    case TriggerKind::QualityNotLoad: return "QualityNotLoad";
    case TriggerKind::Healthy: return "Healthy";
    }
    return "?";
}

/// The four threshold cases. Usage is "high" when either resource passes its
/// up threshold and "low" only when both are under their down thresholds.
inline TriggerKind threshold_precheck(const InstanceTelemetry& t, const ScalingThresholds& th, double mos_target) {
    const bool high = t.cpu_pct > th.cpu_up || t.ram_pct > th.ram_up;
    const bool low = t.cpu_pct < th.cpu_down && t.ram_pct < th.ram_down;
    const bool mos_ok = t.probe_mos >= mos_target;
    if (high && !mos_ok) return TriggerKind::ScaleUpHint;
    if (low && mos_ok) return TriggerKind::ScaleDownHint;
    if (!high && !low && !mos_ok) return TriggerKind::QualityNotLoad;
    return TriggerKind::Healthy;
}

/// Region verdict: any scale-up wins, then any quality issue; scale-down only
/// when every instance asks for it.
inline TriggerKind threshold_precheck(const std::vector<InstanceTelemetry>& region, const ScalingThresholds& th,
                                      double mos_target) {
    if (region.empty()) return TriggerKind::Healthy;
    bool any_quality = false;
    bool all_down = true;
    for (const auto& t : region) {
        const auto k = threshold_precheck(t, th, mos_target);
        if (k == TriggerKind::ScaleUpHint) return k;
        any_quality = any_quality || k == TriggerKind::QualityNotLoad;
        all_down = all_down && k == TriggerKind::ScaleDownHint;
    }
    if (any_quality) return TriggerKind::QualityNotLoad;
    return all_down ? TriggerKind::ScaleDownHint : TriggerKind::Healthy;
}

// ---------------------------------------------------------------------------

enum class DecisionKind { Reallocate, ScaleOut, ScaleIn, NoAction, Alarm };

inline const char* to_string(DecisionKind k) noexcept {
    switch (k) {
    case DecisionKind::Reallocate: return "Reallocate";
    case DecisionKind::ScaleOut: return "ScaleOut";
    case DecisionKind::ScaleIn: return "ScaleIn";
    case DecisionKind::NoAction: return "NoAction";
    case DecisionKind::Alarm: return "Alarm";
    }
    return "?";
}

struct TraceEvent {
    std::string step;
    std::string detail;
    bool operator==(const TraceEvent&) const = default;
};

struct EdmDecision {
    DecisionKind kind = DecisionKind::NoAction;
    /// Final assignment for the post-decision instance set (all kinds except Alarm).
    std::optional<AssignmentSolution> plan;
    /// Instances to create (ScaleOut); ids carry the `kNewInstancePrefix`.
    std::vector<InstanceSnapshot> added;
    /// Instances to retire (ScaleIn).
    std::vector<std::string> removed;
    /// Post-decision session split per instance id.
    std::map<std::string, double> sessions_after;
    std::string reason;
    std::vector<TraceEvent> trace;
    std::uint64_t epoch = 0;

    int new_instance_count() const noexcept { return static_cast<int>(added.size()); }
};

/// Placeholder id prefix for instances created by a scale-out; sorts after
/// ordinary ids.
inline constexpr const char* kNewInstancePrefix = "~new-";

struct EdmOptions {
    SolverBudget solver;
    int max_depth = 8;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline double max_load(const AssignmentSolution& s) {
    double m = 0.0;
    for (const auto& [id, l] : s.per_instance_load) m = std::max(m, l);
    return m;
}

inline double min_load(const AssignmentSolution& s) {
    double m = 100.0;
    for (const auto& [id, l] : s.per_instance_load) m = std::min(m, l);
    return m;
}

/// Load per stream per core, used to re-estimate loads after sessions move.
inline double load_intensity(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog) {
    double weighted = 0.0, streams = 0.0;
    for (const auto& inst : instances) {
        weighted += inst.avg_load * catalog.flavor(catalog.flavor_index(inst.current_flavor)).vcpu;
        streams += inst.sessions;
    }
    return streams > 0.0 ? weighted / streams : 0.0;
}

/// Splits the total session count evenly and re-estimates each load.
inline void redistribute(std::vector<InstanceSnapshot>& instances, double total_sessions, double intensity,
                         const Catalog& catalog) {
    const double each = instances.empty() ? 0.0 : total_sessions / static_cast<double>(instances.size());
    for (auto& inst : instances) {
        const int cpu = catalog.flavor(catalog.flavor_index(inst.current_flavor)).vcpu;
        double load;
        if (inst.sessions > 0.0) load = inst.avg_load * each / inst.sessions;
        else load = intensity * each / cpu;
        inst.avg_load = std::clamp(load, 0.0, 100.0);
        inst.sessions = each;
    }
}

inline std::string plan_summary(const AssignmentSolution& s) {
    std::string out = std::string(to_string(s.status)) + " cost=" + fmt_num(s.total_cost) +
                      " mean_qoe=" + fmt_num(s.avg_qoe);
    if (!s.per_instance_load.empty())
        out += " load=[" + fmt_num(min_load(s)) + "," + fmt_num(max_load(s)) + "]";
    return out;
}

enum class Direction { Any, OutOnly, InOnly };

struct StepState {
    std::vector<InstanceSnapshot> instances;
    std::vector<InstanceSnapshot> added;
    std::vector<std::string> removed;
    int new_counter = 0;
};

inline bool same_as_current(const AssignmentSolution& plan, const std::vector<InstanceSnapshot>& instances) {
    for (const auto& inst : instances) {
        auto it = plan.assignment.find(inst.instance_id);
        if (it == plan.assignment.end() || it->second != inst.current_flavor) return false;
    }
    return true;
}

} // namespace detail

/// One elasticity decision for a set of running instances.
///
/// Solves the assignment problem; when infeasible, probes with the maximum
/// load relaxed to 100 (a solution loading some instance at or above the
/// original maximum means over-utilization: add an instance and retry), then
/// with the minimum load relaxed to 0 (a solution loading some instance at or
/// below the original minimum means under-utilization: remove the least
/// loaded instance and retry). The mean-QoE constraint is never relaxed.
/// A slice is never scaled in below one instance; in that case the relaxed
/// solution is applied as a vertical scale-down instead.
inline EdmDecision edm_step(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                            const SolveParams& params, const EdmOptions& options = {}) {
    if (instances.empty()) throw ValidationError("edm_step needs at least one instance");
    params.validate();

    EdmDecision decision;
    auto& trace = decision.trace;
    detail::StepState st{instances, {}, {}, 0};
    double total_sessions = 0.0;
    for (const auto& inst : instances) total_sessions += inst.sessions;
    const double intensity = detail::load_intensity(instances, catalog);
    auto direction = detail::Direction::Any;

    auto finish = [&](DecisionKind kind, AssignmentSolution plan) {
        decision.kind = kind;
        decision.added.clear();
        for (const auto& a : st.added)
            for (const auto& inst : st.instances)
                if (inst.instance_id == a.instance_id) decision.added.push_back(inst);
        decision.removed = st.removed;
        for (const auto& inst : st.instances) decision.sessions_after[inst.instance_id] = inst.sessions;
        decision.plan = std::move(plan);
        return decision;
    };
    auto alarm = [&](std::string reason) {
        decision.kind = DecisionKind::Alarm;
        decision.reason = std::move(reason);
        trace.push_back({"alarm", decision.reason});
        decision.plan.reset();
        decision.added.clear();
        decision.removed.clear();
        decision.sessions_after.clear();
        return decision;
    };

    for (int depth = 0;; ++depth) {
        const std::string n = "n=" + std::to_string(st.instances.size());
        auto base = solve(st.instances, catalog, params, options.solver);
        trace.push_back({"solve", n + " " + detail::plan_summary(base)});
        if (base.feasible()) {
            if (!st.added.empty()) return finish(DecisionKind::ScaleOut, std::move(base));
            if (!st.removed.empty()) return finish(DecisionKind::ScaleIn, std::move(base));
            const bool unchanged = detail::same_as_current(base, st.instances);
            return finish(unchanged ? DecisionKind::NoAction : DecisionKind::Reallocate, std::move(base));
        }
        if (depth >= options.max_depth) return alarm("recursion depth " + std::to_string(depth) + " reached");

        if (direction != detail::Direction::InOnly) {
            SolveParams relaxed = params;
            relaxed.l_max = 100.0;
            auto probe = solve(st.instances, catalog, relaxed, options.solver);
            const bool over = probe.feasible() && detail::max_load(probe) >= params.l_max - kConstraintTol;
            trace.push_back({"probe_relax_C3", n + " " + detail::plan_summary(probe) +
                                                   (over ? " -> over-utilized, scale out" : " -> no")});
            if (over) {
                InstanceSnapshot fresh;
                fresh.instance_id = std::string(kNewInstancePrefix) + std::to_string(++st.new_counter);
                // place on the cloud with most spare capacity under current flavors
                std::vector<std::string> current;
                for (const auto& inst : st.instances) current.push_back(inst.current_flavor);
                std::size_t best_cloud = 0;
                std::int64_t best_spare = std::numeric_limits<std::int64_t>::min();
                for (std::size_t k = 0; k < catalog.clouds().size(); ++k) {
                    const auto spare = remaining_capacity(catalog.cloud(k), catalog, current);
                    if (spare > best_spare) {
                        best_spare = spare;
                        best_cloud = k;
                    }
                }
                const auto& cloud = catalog.cloud(best_cloud);
                std::size_t pick = cloud.first;
                for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
                    const auto& f = catalog.flavor(j);
                    const auto& b = catalog.flavor(pick);
                    if (f.vcpu < b.vcpu || (f.vcpu == b.vcpu && f.cost_per_hour < b.cost_per_hour)) pick = j;
                }
                fresh.cloud_id = cloud.id;
                fresh.current_flavor = catalog.flavor(pick).id;
                fresh.sessions = 0.0;
                st.instances.push_back(fresh);
                detail::redistribute(st.instances, total_sessions, intensity, catalog);
                for (auto& inst : st.instances)
                    inst.measured_qoe = mos_flavored(inst.sessions,
                                                     catalog.flavor(catalog.flavor_index(inst.current_flavor)).vcpu,
                                                     catalog.eta(catalog.flavor_index(inst.current_flavor)), params.sigma);
                st.added.push_back(fresh);
                trace.push_back({"scale_out", "add " + fresh.instance_id + " on " + cloud.id + " (" +
                                                  fresh.current_flavor + ")"});
                direction = detail::Direction::OutOnly;
                continue;
            }
        }

        if (direction != detail::Direction::OutOnly) {
            SolveParams relaxed = params;
            relaxed.l_min = 0.0;
            auto probe = solve(st.instances, catalog, relaxed, options.solver);
            const bool under = probe.feasible() && detail::min_load(probe) <= params.l_min + kConstraintTol;
            trace.push_back({"probe_relax_C4", n + " " + detail::plan_summary(probe) +
                                                   (under ? " -> under-utilized, scale in" : " -> no")});
            if (under) {
                if (st.instances.size() == 1) {
                    trace.push_back({"min_footprint", "single instance kept; relaxed plan applied as vertical scaling"});
                    if (!st.removed.empty()) return finish(DecisionKind::ScaleIn, std::move(probe));
                    const bool unchanged = detail::same_as_current(probe, st.instances);
                    return finish(unchanged ? DecisionKind::NoAction : DecisionKind::Reallocate, std::move(probe));
                }
                auto victim = std::min_element(st.instances.begin(), st.instances.end(),
                                               [](const InstanceSnapshot& a, const InstanceSnapshot& b) {
                                                   if (a.avg_load != b.avg_load) return a.avg_load < b.avg_load;
                                                   return a.instance_id < b.instance_id;
                                               });
                const std::string victim_id = victim->instance_id;
                auto added_it = std::find_if(st.added.begin(), st.added.end(),
                                             [&](const InstanceSnapshot& s) { return s.instance_id == victim_id; });
                if (added_it != st.added.end()) st.added.erase(added_it);
                else st.removed.push_back(victim_id);
                st.instances.erase(victim);
                detail::redistribute(st.instances, total_sessions, intensity, catalog);
                trace.push_back({"scale_in", "remove " + victim_id});
                direction = detail::Direction::InOnly;
                continue;
            }
        }
        return alarm("infeasible under both load relaxations");
    }
}

} // namespace cdnslice
