#pragma once

// Slice lifecycle: dimensioning, instance phases, changeovers driven by EDM
// decisions, cost accounting and metric snapshots.

#include "cdnslice/edm_decision.hpp"
#include "cdnslice/errors.hpp"
#include "cdnslice/flavor_catalog.hpp"
#include "cdnslice/qoe_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cdnslice {

struct RegionRequest {
    std::string region_id;
    std::int64_t max_streams = 0; // n; 0 marks a dormant region
    double q_min = 4.0;
    std::string cloud_id; // optional placement pin
};

struct SliceRequest {
    std::string customer_id;
    std::vector<RegionRequest> regions;
    double duration_hours = 24.0;
    ScalingThresholds thresholds;
    double monitoring_period_s = 60.0;
    double sigma = 0.1;

    void validate() const {
        if (regions.empty()) throw ValidationError("slice request has no regions");
        std::set<std::string> seen;
        for (const auto& r : regions) {
            if (r.region_id.empty()) throw ValidationError("region with empty id");
            if (!seen.insert(r.region_id).second) throw ValidationError("duplicate region '" + r.region_id + "'");
            if (r.max_streams < 0) throw ValidationError("region '" + r.region_id + "' has negative demand");
            if (!(r.q_min >= 1.0 && r.q_min < kBaseMos)) throw InvalidQoeTarget(r.q_min);
        }
        if (!(duration_hours > 0.0)) throw ValidationError("duration must be positive");
        if (!(monitoring_period_s > 0.0)) throw ValidationError("monitoring period must be positive");
        if (sigma < 0.0 || sigma > 1.0) throw ValidationError("sigma must lie in [0,1]");
        thresholds.validate();
    }
};

struct ChangeoverTiming {
    double boot_delay = 10.0;
    double drain_sleep = 8.0;

    double total_changeover() const noexcept { return boot_delay + drain_sleep; }
    void validate() const {
        if (boot_delay < 0.0 || drain_sleep < 0.0) throw ValidationError("changeover delays must be non-negative");
    }
};

/// vCPUs needed to carry n streams at q_min: ceil(n / n*), at least one.
inline std::int64_t required_vcpus(std::int64_t n, double q_min) {
    const std::int64_t per_core = max_streams_for_qoe(q_min);
    if (n <= 0) return 0;
    return std::max<std::int64_t>(1, (n + per_core - 1) / per_core);
}

struct RegionPlan {
    std::string region_id;
    std::int64_t streams_per_vcpu = 0;
    std::int64_t vcpus = 0;
    std::string cloud_id;
    std::vector<std::string> flavors; // one per instance
    double cost_per_hour = 0.0;
    bool dormant() const noexcept { return vcpus == 0; }
};

namespace detail {

struct CoverChoice {
    std::int64_t ticks = std::numeric_limits<std::int64_t>::max();
    std::vector<std::size_t> flavors;
};

/// Cheapest multiset of one cloud's flavors whose vCPUs cover `need` and fit
/// in `capacity`. Ties go to fewer instances, then to smaller flavor ids.
inline std::optional<CoverChoice> cheapest_cover(const Catalog& catalog, const CloudDomain& cloud, std::int64_t need,
                                                 std::int64_t capacity) {
    std::map<int, std::size_t> best_of_size;
    for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
        const auto& f = catalog.flavor(j);
        auto it = best_of_size.find(f.vcpu);
        if (it == best_of_size.end()) {
            best_of_size[f.vcpu] = j;
            continue;
        }
        const auto& b = catalog.flavor(it->second);
        if (f.cost_per_hour < b.cost_per_hour || (f.cost_per_hour == b.cost_per_hour && f.id < b.id)) it->second = j;
    }
    int max_cpu = 0;
    for (const auto& [cpu, j] : best_of_size) max_cpu = std::max(max_cpu, cpu);
    const std::int64_t top = std::min<std::int64_t>(capacity, need + max_cpu);
    if (top < need) return std::nullopt;

    auto key_less = [&](const CoverChoice& a, const CoverChoice& b) {
        if (a.ticks != b.ticks) return a.ticks < b.ticks;
        if (a.flavors.size() != b.flavors.size()) return a.flavors.size() < b.flavors.size();
        std::vector<std::string> ia, ib;
        for (auto j : a.flavors) ia.push_back(catalog.flavor(j).id);
        for (auto j : b.flavors) ib.push_back(catalog.flavor(j).id);
        return ia < ib;
    };

    std::vector<std::optional<CoverChoice>> dp(static_cast<std::size_t>(top + 1));
    dp[0] = CoverChoice{0, {}};
    for (std::int64_t t = 1; t <= top; ++t) {
        for (const auto& [cpu, j] : best_of_size) {
            if (cpu > t || !dp[t - cpu]) continue;
            CoverChoice c = *dp[t - cpu];
            c.ticks += cost_ticks(catalog.flavor(j).cost_per_hour);
            c.flavors.push_back(j);
            std::sort(c.flavors.begin(), c.flavors.end(), [&](std::size_t a, std::size_t b) {
                return catalog.flavor(a).id < catalog.flavor(b).id;
            });
            if (!dp[t] || key_less(c, *dp[t])) dp[t] = std::move(c);
        }
    }
    std::optional<CoverChoice> best;
    for (std::int64_t t = need; t <= top; ++t)
        if (dp[t] && (!best || key_less(*dp[t], *best))) best = dp[t];
    return best;
}

} // namespace detail

/// Per-region dimensioning. Regions are served in request order and each
/// consumes capacity from the cloud it lands on.
inline std::vector<RegionPlan> dimension_slice(const SliceRequest& request, const Catalog& catalog) {
    request.validate();
    std::vector<std::int64_t> left;
    for (const auto& c : catalog.clouds()) left.push_back(c.capacity_vcpus);
    std::vector<RegionPlan> out;
    for (const auto& r : request.regions) {
        RegionPlan plan;
        plan.region_id = r.region_id;
        plan.streams_per_vcpu = max_streams_for_qoe(r.q_min);
        plan.vcpus = required_vcpus(r.max_streams, r.q_min);
        if (plan.vcpus == 0) {
            out.push_back(plan);
            continue;
        }
        std::optional<detail::CoverChoice> best;
        std::size_t best_cloud = 0;
        for (std::size_t k = 0; k < catalog.clouds().size(); ++k) {
            const auto& cloud = catalog.cloud(k);
            if (!r.cloud_id.empty() && cloud.id != r.cloud_id) continue;
            auto c = detail::cheapest_cover(catalog, cloud, plan.vcpus, left[k]);
            if (c && (!best || c->ticks < best->ticks ||
                      (c->ticks == best->ticks && c->flavors.size() < best->flavors.size()))) {
                best = std::move(c);
                best_cloud = k;
            }
        }
        if (!best)
            throw CapacityError("no cloud can host " + std::to_string(plan.vcpus) + " vCPUs for region '" +
                                r.region_id + "'");
        plan.cloud_id = catalog.cloud(best_cloud).id;
        for (auto j : best->flavors) {
            plan.flavors.push_back(catalog.flavor(j).id);
            plan.cost_per_hour += catalog.flavor(j).cost_per_hour;
            left[best_cloud] -= catalog.flavor(j).vcpu;
        }
        out.push_back(plan);
    }
    return out;
}

// ---------------------------------------------------------------------------

enum class Phase { Booting, Active, Draining, Terminated };

inline const char* to_string(Phase p) noexcept {
    switch (p) {
    case Phase::Booting: return "Booting";
    case Phase::Active: return "Active";
    case Phase::Draining: return "Draining";
    case Phase::Terminated: return "Terminated";
    }
    return "?";
}

struct VnfInstance {
    InstanceSnapshot snap;
    std::string region_id;
    Phase phase = Phase::Booting;
    double created_at = 0.0;
    double active_at = -1.0;
    double drain_at = -1.0;
    double terminated_at = -1.0;
    std::string replaces;    // instance this one supersedes on activation
    bool retiring = false;   // scheduled to drain
    double cpu_pct = 0.0;
    double ram_pct = 0.0;
    double accrued_cost = 0.0;

    bool billed() const noexcept { return phase == Phase::Active || phase == Phase::Draining; }
};

struct DecisionRecord {
    double t = 0.0;
    std::uint64_t epoch = 0;
    std::string region_id;
    std::string kind;
    std::string summary;
    std::vector<TraceEvent> trace;
};

struct LifecycleEvent {
    double t = 0.0;
    std::string instance_id;
    std::string region_id;
    Phase phase = Phase::Booting;
};

struct RegionMetrics {
    std::string region_id;
    int instances = 0; // Active
    int booting = 0;
    int draining = 0;
    std::int64_t vcpus = 0; // Active
    double cost_usd_h = 0.0; // billing rate right now
    double accrued_cost = 0.0;
    double mos_mean = kBaseMos;
    double load_mean = 0.0;
    double sessions = 0.0;
};

class SliceState {
public:
    SliceState(std::string slice_id, SliceRequest request, const Catalog& catalog, ChangeoverTiming timing,
               double now)
        : id_(std::move(slice_id)), request_(std::move(request)), catalog_(&catalog), timing_(timing), clock_(now) {
        timing_.validate();
        plans_ = dimension_slice(request_, catalog);
        for (const auto& plan : plans_) {
            Region reg;
            reg.request = *std::find_if(request_.regions.begin(), request_.regions.end(),
                                        [&](const RegionRequest& r) { return r.region_id == plan.region_id; });
            reg.dormant = plan.dormant();
            regions_[plan.region_id] = reg;
            for (const auto& f : plan.flavors) launch(plan.region_id, f, "", now);
            std::string summary = "v=" + std::to_string(plan.vcpus) + " n*=" + std::to_string(plan.streams_per_vcpu);
            if (plan.dormant()) summary += " dormant";
            else {
                summary += " cloud=" + plan.cloud_id + " flavors=";
                for (std::size_t i = 0; i < plan.flavors.size(); ++i) summary += (i ? "," : "") + plan.flavors[i];
            }
            log_.push_back({now, 0, plan.region_id, "Dimension", summary, {}});
        }
    }

    const std::string& id() const noexcept { return id_; }
    const SliceRequest& request() const noexcept { return request_; }
    const std::vector<RegionPlan>& plans() const noexcept { return plans_; }
    const ChangeoverTiming& timing() const noexcept { return timing_; }
    const std::vector<DecisionRecord>& log() const noexcept { return log_; }
    const std::vector<LifecycleEvent>& lifecycle() const noexcept { return lifecycle_; }
    const std::map<std::string, VnfInstance>& instances() const noexcept { return instances_; }
    double clock() const noexcept { return clock_; }
    double accrued_cost() const noexcept { return accrued_; }

    std::vector<std::string> region_ids() const {
        std::vector<std::string> out;
        for (const auto& r : request_.regions) out.push_back(r.region_id);
        return out;
    }
    bool dormant(const std::string& region) const { return region_at(region).dormant; }
    std::uint64_t epoch(const std::string& region) const { return region_at(region).epoch; }
    const RegionRequest& region_request(const std::string& region) const { return region_at(region).request; }

    /// Instances of a region in the given phase, in id order.
    std::vector<const VnfInstance*> members(const std::string& region, Phase phase) const {
        std::vector<const VnfInstance*> out;
        for (const auto& [id, inst] : instances_)
            if (inst.region_id == region && inst.phase == phase) out.push_back(&inst);
        return out;
    }

    /// True while a changeover for the region is still in flight.
    bool changing(const std::string& region) const {
        for (const auto& [id, inst] : instances_)
            if (inst.region_id == region && (inst.phase == Phase::Booting || inst.phase == Phase::Draining))
                return true;
        return false;
    }

    /// Processes scheduled phase changes up to `t` and accrues cost.
    void advance_to(double t) {
        if (t < clock_) throw ValidationError("slice clock cannot move backwards");
        while (!pending_.empty() && pending_.begin()->t <= t) {
            const auto ev = *pending_.begin();
            pending_.erase(pending_.begin());
            accrue(ev.t);
            fire(ev);
        }
        accrue(t);
    }

    /// Even split of a region's sessions over serving instances.
    void route(const std::string& region, double total_sessions) {
        auto& reg = region_at(region);
        reg.sessions = total_sessions;
        rebalance(region);
    }

    double region_sessions(const std::string& region) const { return region_at(region).sessions; }

    void set_metrics(const std::string& instance_id, double cpu_pct, double ram_pct, double load, double mos) {
        auto& inst = instances_.at(instance_id);
        inst.cpu_pct = cpu_pct;
        inst.ram_pct = ram_pct;
        inst.snap.avg_load = std::clamp(load, 0.0, 100.0);
        inst.snap.measured_qoe = mos;
    }

    /// Snapshot of the region's Active instances as EDM input.
    std::vector<InstanceSnapshot> edm_input(const std::string& region) const {
        std::vector<InstanceSnapshot> out;
        for (const auto* inst : members(region, Phase::Active)) out.push_back(inst->snap);
        return out;
    }

    SolveParams solve_params(const std::string& region) const {
        SolveParams p;
        p.q_min = region_at(region).request.q_min;
        p.l_min = request_.thresholds.l_min;
        p.l_max = request_.thresholds.l_max;
        p.sigma = request_.sigma;
        p.period_hours = request_.monitoring_period_s / 3600.0;
        return p;
    }

    /// Applies a decision made for the region's current epoch. Re-applying
    /// the previous epoch's decision is a no-op; any other epoch is stale.
    void apply_decision(const std::string& region, const EdmDecision& d, double now) {
        advance_to(now);
        auto& reg = region_at(region);
        if (d.epoch + 1 == reg.epoch && reg.applied.count(d.epoch)) return;
        if (d.epoch != reg.epoch)
            throw StaleDecision("decision for epoch " + std::to_string(d.epoch) + " but region '" + region +
                                "' is at epoch " + std::to_string(reg.epoch));
        DecisionRecord rec{now, d.epoch, region, to_string(d.kind), d.reason, d.trace};

        switch (d.kind) {
        case DecisionKind::NoAction: break;
        case DecisionKind::Alarm: break;
        case DecisionKind::ScaleIn: {
            const auto active = members(region, Phase::Active);
            std::size_t staying = 0;
            for (const auto* inst : active)
                if (std::find(d.removed.begin(), d.removed.end(), inst->snap.instance_id) == d.removed.end())
                    ++staying;
            if (staying == 0) {
                rec.kind = to_string(DecisionKind::Alarm);
                rec.summary = "scale-in would leave region without instances";
                rec.trace.push_back({"min_footprint_guard", rec.summary});
                break;
            }
            for (const auto& victim : d.removed) retire(victim, now);
            reflavor(region, d, now);
            rebalance(region);
            rec.summary = "remove";
            for (const auto& v : d.removed) rec.summary += " " + v;
            break;
        }
        case DecisionKind::ScaleOut: {
            std::string added;
            for (const auto& a : d.added) {
                const std::string flavor = d.plan ? d.plan->assignment.at(a.instance_id) : a.current_flavor;
                added += " " + launch(region, flavor, "", now);
            }
            reflavor(region, d, now);
            rec.summary = "add" + added;
            break;
        }
        case DecisionKind::Reallocate: rec.summary = reflavor(region, d, now); break;
        }
        if (d.plan && rec.kind != "Alarm") rec.summary += (rec.summary.empty() ? "" : " | ") + detail::plan_summary(*d.plan);
        log_.push_back(std::move(rec));
        reg.applied.insert(d.epoch);
        ++reg.epoch;
    }

    /// Records a monitoring verdict that did not reach the EDM.
    void note(const std::string& region, double t, std::string kind, std::string summary) {
        log_.push_back({t, region_at(region).epoch, region, std::move(kind), std::move(summary), {}});
    }

    RegionMetrics metrics(const std::string& region) const {
        RegionMetrics m;
        m.region_id = region;
        const auto& reg = region_at(region);
        m.accrued_cost = reg.accrued;
        m.sessions = reg.sessions;
        double mos_w = 0.0, sess = 0.0, load = 0.0;
        for (const auto& [id, inst] : instances_) {
            if (inst.region_id != region) continue;
            const auto& f = catalog_->flavor(catalog_->flavor_index(inst.snap.current_flavor));
            if (inst.billed()) m.cost_usd_h += f.cost_per_hour;
            if (inst.phase == Phase::Booting) ++m.booting;
            if (inst.phase == Phase::Draining) ++m.draining;
            if (inst.phase != Phase::Active) continue;
            ++m.instances;
            m.vcpus += f.vcpu;
            load += inst.snap.avg_load;
            mos_w += clamp_mos(inst.snap.measured_qoe) * inst.snap.sessions;
            sess += inst.snap.sessions;
        }
        if (m.instances > 0) m.load_mean = load / m.instances;
        m.mos_mean = sess > 0.0 ? mos_w / sess : kBaseMos;
        return m;
    }

    std::vector<RegionMetrics> snapshot_metrics() const {
        std::vector<RegionMetrics> out;
        for (const auto& r : region_ids()) out.push_back(metrics(r));
        return out;
    }

    /// Sum of sessions over serving instances equals the routed total.
    bool sessions_conserved(const std::string& region) const {
        double s = 0.0;
        for (const auto& [id, inst] : instances_)
            if (inst.region_id == region) s += inst.snap.sessions;
        const double want = region_at(region).sessions;
        return std::abs(s - want) <= 1e-6 * std::max(1.0, want);
    }

    /// At least one Active or Draining instance in every demanded region.
    bool continuity_holds() const {
        for (const auto& [rid, reg] : regions_) {
            if (reg.dormant) continue;
            bool serving = false;
            for (const auto& [id, inst] : instances_)
                if (inst.region_id == rid && (inst.phase == Phase::Active || inst.phase == Phase::Draining))
                    serving = true;
            if (!serving) return false;
        }
        return true;
    }

private:
    struct Region {
        RegionRequest request;
        bool dormant = false;
        std::uint64_t epoch = 0;
        std::set<std::uint64_t> applied;
        double sessions = 0.0;
        double accrued = 0.0;
    };

    struct Pending {
        double t;
        std::uint64_t seq;
        std::string instance_id;
        Phase phase;
        bool operator<(const Pending& o) const { return t != o.t ? t < o.t : seq < o.seq; }
    };

    Region& region_at(const std::string& region) {
        auto it = regions_.find(region);
        if (it == regions_.end()) throw ValidationError("unknown region '" + region + "'");
        return it->second;
    }
    const Region& region_at(const std::string& region) const {
        auto it = regions_.find(region);
        if (it == regions_.end()) throw ValidationError("unknown region '" + region + "'");
        return it->second;
    }

    std::string launch(const std::string& region, const std::string& flavor, const std::string& replaces, double now) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "-i%03d", ++counter_);
        VnfInstance inst;
        inst.snap.instance_id = region + buf;
        inst.snap.current_flavor = flavor;
        inst.snap.cloud_id = catalog_->flavor(catalog_->flavor_index(flavor)).cloud_id;
        inst.region_id = region;
        inst.created_at = now;
        inst.replaces = replaces;
        const std::string id = inst.snap.instance_id;
        instances_[id] = inst;
        lifecycle_.push_back({now, id, region, Phase::Booting});
        schedule(now + timing_.boot_delay, id, Phase::Active);
        return id;
    }

    void retire(const std::string& instance_id, double now) {
        auto it = instances_.find(instance_id);
        if (it == instances_.end() || it->second.retiring) return;
        it->second.retiring = true;
        if (it->second.phase == Phase::Active) set_phase(it->second, Phase::Draining, now);
        schedule(now + timing_.drain_sleep, instance_id, Phase::Terminated);
    }

    // Boot replacements for plan entries whose flavor differs from the
    // instance's current one.
    std::string reflavor(const std::string& region, const EdmDecision& d, double now) {
        if (!d.plan) return {};
        std::string out;
        for (const auto* inst : members(region, Phase::Active)) {
            if (inst->retiring) continue;
            auto it = d.plan->assignment.find(inst->snap.instance_id);
            if (it == d.plan->assignment.end() || it->second == inst->snap.current_flavor) continue;
            const std::string fresh = launch(region, it->second, inst->snap.instance_id, now);
            out += (out.empty() ? "" : " ") + inst->snap.instance_id + "(" + inst->snap.current_flavor + ")->" +
                   fresh + "(" + it->second + ")";
        }
        return out;
    }

    void schedule(double t, const std::string& id, Phase phase) { pending_.insert({t, ++seq_, id, phase}); }

    void set_phase(VnfInstance& inst, Phase phase, double t) {
        inst.phase = phase;
        if (phase == Phase::Active) inst.active_at = t;
        if (phase == Phase::Draining) inst.drain_at = t;
        if (phase == Phase::Terminated) inst.terminated_at = t;
        lifecycle_.push_back({t, inst.snap.instance_id, inst.region_id, phase});
    }

    void fire(const Pending& ev) {
        auto& inst = instances_.at(ev.instance_id);
        if (inst.phase == Phase::Terminated) return;
        set_phase(inst, ev.phase, ev.t);
        if (ev.phase == Phase::Active && !inst.replaces.empty()) {
            auto& old = instances_.at(inst.replaces);
            // carry the predecessor's load estimate over, rescaled to the new flavor
            const int old_cpu = catalog_->flavor(catalog_->flavor_index(old.snap.current_flavor)).vcpu;
            const int new_cpu = catalog_->flavor(catalog_->flavor_index(inst.snap.current_flavor)).vcpu;
            inst.snap.avg_load = scaled_load(old.snap.avg_load, old_cpu, new_cpu);
            inst.snap.measured_qoe = old.snap.measured_qoe;
            retire(inst.replaces, ev.t);
        }
        if (ev.phase == Phase::Terminated) inst.snap.sessions = 0.0;
        rebalance(inst.region_id);
    }

    void rebalance(const std::string& region) {
        auto& reg = region_at(region);
        std::vector<VnfInstance*> serving, fallback;
        for (auto& [id, inst] : instances_) {
            if (inst.region_id != region) continue;
            inst.snap.sessions = 0.0;
            if (inst.phase == Phase::Active && !inst.retiring) serving.push_back(&inst);
            else if (inst.phase == Phase::Active || inst.phase == Phase::Draining || inst.phase == Phase::Booting)
                fallback.push_back(&inst);
        }
        auto& targets = serving.empty() ? fallback : serving;
        if (targets.empty()) return;
        const double each = reg.sessions / static_cast<double>(targets.size());
        for (auto* inst : targets) inst->snap.sessions = each;
    }

    void accrue(double t) {
        if (t <= clock_) return;
        const double hours = (t - clock_) / 3600.0;
        for (auto& [id, inst] : instances_) {
            if (!inst.billed()) continue;
            const double c = catalog_->flavor(catalog_->flavor_index(inst.snap.current_flavor)).cost_per_hour * hours;
            inst.accrued_cost += c;
            regions_.at(inst.region_id).accrued += c;
            accrued_ += c;
        }
        clock_ = t;
    }

    std::string id_;
    SliceRequest request_;
    const Catalog* catalog_;
    ChangeoverTiming timing_;
    double clock_;
    std::vector<RegionPlan> plans_;
    std::map<std::string, Region> regions_;
    std::map<std::string, VnfInstance> instances_;
    std::set<Pending> pending_;
    std::vector<DecisionRecord> log_;
    std::vector<LifecycleEvent> lifecycle_;
    std::uint64_t seq_ = 0;
    int counter_ = 0;
    double accrued_ = 0.0;
};

} // namespace cdnslice
