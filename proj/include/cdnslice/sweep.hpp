#pragma once

// Offline parameter sweeps of the assignment problem over synthetic slices:
// mean cost per instance, mean QoE, mean load and solve time against slice
// size for several QoE or load floors.

#include "cdnslice/edm_solvers.hpp"
#include "cdnslice/flavor_catalog.hpp"
#include "cdnslice/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cdnslice {

inline constexpr double kHoursPerMonth = 730.0;

enum class SweepAxis { Instances, QMin, LMin };

inline SweepAxis parse_axis(const std::string& s) {
    if (s == "n_instances" || s == "instances" || s == "size") return SweepAxis::Instances;
    if (s == "q_min") return SweepAxis::QMin;
    if (s == "l_min") return SweepAxis::LMin;
    throw ConfigError("unknown sweep axis '" + s + "' (n_instances, q_min, l_min)");
}

inline const char* to_string(SweepAxis a) noexcept {
    switch (a) {
    case SweepAxis::Instances: return "n_instances";
    case SweepAxis::QMin: return "q_min";
    case SweepAxis::LMin: return "l_min";
    }
    return "?";
}

struct SweepConfig {
    std::uint64_t seed = 42;
    SyntheticCatalogParams catalog;
    std::vector<int> sizes; // defaults to 10..300 step 10
    SweepAxis axis = SweepAxis::QMin;
    std::vector<double> values; // axis values; defaults per axis
    int replications = 5;
    double sigma = 0.1;
    double q_min = 4.5;
    double l_min = 25.0;
    double l_max = 100.0;
    double load_lo = 40.0; // initial loads drawn uniformly, mean 70
    double load_hi = 100.0;
    int max_initial_vcpus = 2;     // initial flavors drawn among those this small
    double mos_lo = 3.5; // measured QoE on the initial flavor, uniform
    double mos_hi = 5.0;
    double qoe_margin = 0.05; // headroom kept above the tightest floor in pools
    bool cross_cloud_moves = true;
    SolverBudget budget;

    void fill_defaults() {
        if (sizes.empty())
            for (int n = 10; n <= 300; n += 10) sizes.push_back(n);
        if (values.empty()) {
            if (axis == SweepAxis::QMin) values = {2.5, 3.5, 4.5};
            else if (axis == SweepAxis::LMin) values = {50.0, 80.0};
            else values = {q_min};
        }
    }
    void validate() const {
        if (replications < 1) throw ConfigError("replications must be >= 1");
        for (int n : sizes)
            if (n < 1) throw ConfigError("slice sizes must be positive");
        if (!(mos_lo >= 0.0 && mos_lo <= mos_hi && mos_hi <= kBaseMos))
            throw ConfigError("need 0 <= mos_lo <= mos_hi <= 5");
        if (max_initial_vcpus < 1) throw ConfigError("max_initial_vcpus must be >= 1");
        if (!(load_lo >= 0.0 && load_lo <= load_hi && load_hi <= 100.0)) throw ConfigError("bad load range");
    }
};

struct SweepPoint {
    double value = 0.0;
    int size = 0;
    int rep = 0;
    bool feasible = false;
    SolveStatus status = SolveStatus::Infeasible;
    double cost_per_instance_h = 0.0;
    double avg_qoe = 0.0;     // clamped to [1,5]
    double avg_qoe_raw = 0.0; // as constrained
    double mean_load = 0.0;
    double seconds = 0.0;
    double gap = 0.0;
    bool budget_exceeded = false;
    double q_min = 0.0;
    int saturated_clouds = 0; // clouds left with no free vCPU
};

struct SweepAggregate {
    double value = 0.0;
    int size = 0;
    int feasible = 0;
    int total = 0;
    double mean_cost_h = 0.0;
    double ci95_cost_h = 0.0;
    double mean_qoe = 0.0;
    double mean_load = 0.0;
    double mean_seconds = 0.0;
};

struct SweepResult {
    SweepConfig config;
    std::vector<SweepPoint> points;
    std::vector<SweepAggregate> aggregates;
    std::vector<std::string> violations;
};

namespace detail {

inline SolveParams sweep_params(const SweepConfig& cfg, double value) {
    SolveParams p;
    p.q_min = cfg.q_min;
    p.l_min = cfg.l_min;
    p.l_max = cfg.l_max;
    p.sigma = cfg.sigma;
    p.cross_cloud_moves = cfg.cross_cloud_moves;
    if (cfg.axis == SweepAxis::QMin) p.q_min = value;
    if (cfg.axis == SweepAxis::LMin) p.l_min = value;
    return p;
}

/// Highest QoE one instance can reach on its own under the load window,
/// stream cap and cloud capacity of `p`; nullopt when no flavor fits.
inline std::optional<double> best_qoe(const InstanceSnapshot& inst, const Catalog& cat, const SolveParams& p) {
    const std::size_t cur = cat.flavor_index(inst.current_flavor);
    const int cur_cpu = cat.flavor(cur).vcpu;
    const auto home = cat.cloud_index_of_flavor(cur);
    std::optional<double> best;
    for (std::size_t k = 0; k < cat.clouds().size(); ++k) {
        if (!p.cross_cloud_moves && k != home) continue;
        const auto& cloud = cat.cloud(k);
        for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
            const auto& f = cat.flavor(j);
            if (f.vcpu > cloud.capacity_vcpus) continue;
            if (!load_within(scaled_load(inst.avg_load, cur_cpu, f.vcpu), p.l_min, p.l_max)) continue;
            if (inst.sessions > static_cast<double>(rho_max(f.vcpu))) continue;
            const double q = mos_flavored(inst.sessions, f.vcpu, cat.eta(j), p.sigma);
            if (!best || q > *best) best = q;
        }
    }
    return best;
}

} // namespace detail

/// Random instance pool: initial flavor uniform over the small catalog
/// flavors, measured QoE and load uniform in their ranges, sessions backed
/// out of the measured QoE.
/// A draw is redrawn when it has no flavor under the tightest setting of the
/// axis, or when taking it would leave the best reachable mean QoE of the
/// pool so far below the tightest floor plus a margin. The margin leaves room
/// for instances competing over the same high-QoE clouds.
inline std::vector<InstanceSnapshot> sweep_instances(const SweepConfig& cfg, const Catalog& cat, int count,
                                                     std::uint64_t seed) {
    Rng rng(seed);
    const double tight_value = cfg.values.empty() ? 0.0 : *std::max_element(cfg.values.begin(), cfg.values.end());
    const SolveParams tight = detail::sweep_params(cfg, tight_value);
    std::vector<InstanceSnapshot> out;
    std::vector<std::size_t> initial;
    for (std::size_t j = 0; j < cat.flavors().size(); ++j)
        if (cat.flavor(j).vcpu <= cfg.max_initial_vcpus) initial.push_back(j);
    if (initial.empty()) throw ConfigError("no catalog flavor within max_initial_vcpus");
    const auto p = static_cast<std::int64_t>(initial.size());
    int attempts = 0;
    double best_sum = 0.0;
    while (static_cast<int>(out.size()) < count) {
        if (++attempts > count * 10000) throw ConfigError("cannot draw admissible sweep instances");
        const auto& f = cat.flavor(initial[static_cast<std::size_t>(uniform_int(rng, 0, p - 1))]);
        InstanceSnapshot s;
        char id[16];
        std::snprintf(id, sizeof id, "v%04zu", out.size());
        s.instance_id = id;
        s.current_flavor = f.id;
        s.cloud_id = f.cloud_id;
        const double eta = cat.eta(cat.flavor_index(f.id));
        const double mos = uniform_real(rng, cfg.mos_lo, cfg.mos_hi);
        const double headroom = std::max(0.0, kBaseMos + kBaseMos * cfg.sigma * eta - mos);
        s.sessions = std::min(std::floor(f.vcpu * std::sqrt(headroom / kQuadCoeff)), static_cast<double>(rho_max(f.vcpu)));
        s.avg_load = uniform_real(rng, cfg.load_lo, cfg.load_hi);
        s.measured_qoe = mos_flavored(s.sessions, f.vcpu, eta, cfg.sigma);
        const auto best = detail::best_qoe(s, cat, tight);
        if (!best) continue;
        if (best_sum + *best < static_cast<double>(out.size() + 1) * (tight.q_min + cfg.qoe_margin)) continue;
        best_sum += *best;
        out.push_back(s);
    }
    return out;
}

/// Runs every (replication, size, value) point. Within a replication the
/// slice of size n is the first n instances of one pool, and values are
/// solved tightest first, each solution seeding the next looser solve.
inline SweepResult run_sweep(SweepConfig cfg) {
    cfg.fill_defaults();
    cfg.validate();
    const Catalog cat = generate_synthetic_catalog(cfg.catalog);
    SweepResult res;
    res.config = cfg;
    std::vector<double> order = cfg.values;
    std::sort(order.begin(), order.end(), std::greater<>());
    const int max_size = *std::max_element(cfg.sizes.begin(), cfg.sizes.end());

    for (int rep = 0; rep < cfg.replications; ++rep) {
        const auto pool = sweep_instances(cfg, cat, max_size, derive_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
        for (int n : cfg.sizes) {
            const std::vector<InstanceSnapshot> inst(pool.begin(), pool.begin() + n);
            std::optional<AssignmentSolution> warm;
            for (double v : order) {
                const auto params = detail::sweep_params(cfg, v);
                const auto t0 = std::chrono::steady_clock::now();
                auto sol = solve(inst, cat, params, cfg.budget, warm && warm->feasible() ? &*warm : nullptr);
                const auto t1 = std::chrono::steady_clock::now();
                SweepPoint pt;
                pt.value = v;
                pt.size = n;
                pt.rep = rep;
                pt.q_min = params.q_min;
                pt.feasible = sol.feasible();
                pt.status = sol.status;
                pt.seconds = std::chrono::duration<double>(t1 - t0).count();
                pt.gap = sol.gap;
                pt.budget_exceeded = sol.budget_exceeded;
                if (sol.feasible()) {
                    pt.cost_per_instance_h = sol.total_cost / n;
                    pt.avg_qoe_raw = sol.avg_qoe;
                    double q = 0.0, l = 0.0;
                    for (const auto& s : inst) {
                        const auto j = cat.flavor_index(sol.assignment.at(s.instance_id));
                        q += clamp_mos(mos_flavored(s.sessions, cat.flavor(j).vcpu, cat.eta(j), params.sigma));
                        l += sol.per_instance_load.at(s.instance_id);
                    }
                    pt.avg_qoe = q / n;
                    for (const auto& cloud : cat.clouds()) {
                        std::vector<std::string> ids;
                        for (const auto& [inst_id, fid] : sol.assignment) ids.push_back(fid);
                        if (remaining_capacity(cloud, cat, ids) == 0) ++pt.saturated_clouds;
                    }
                    pt.mean_load = l / n;
                    const auto v_list = check_feasibility(sol, inst, cat, params);
                    for (const auto& viol : v_list)
                        res.violations.push_back("rep " + std::to_string(rep) + " n=" + std::to_string(n) + " " +
                                                 to_string(cfg.axis) + "=" + std::to_string(v) + ": " +
                                                 to_string(viol.constraint) + " " + viol.detail);
                    if (sol.avg_qoe < params.q_min - 1e-9)
                        res.violations.push_back("mean QoE below floor at n=" + std::to_string(n));
                    warm = sol;
                }
                res.points.push_back(pt);
            }
        }
    }

    // per-seed ordering: a tighter value never costs less
    for (int rep = 0; rep < cfg.replications; ++rep)
        for (int n : cfg.sizes) {
            std::vector<const SweepPoint*> row;
            for (const auto& p : res.points)
                if (p.rep == rep && p.size == n && p.feasible) row.push_back(&p);
            std::sort(row.begin(), row.end(), [](auto* a, auto* b) { return a->value < b->value; });
            for (std::size_t i = 1; i < row.size(); ++i)
                if (row[i]->cost_per_instance_h < row[i - 1]->cost_per_instance_h - 1e-12)
                    res.violations.push_back("ordering broken at rep " + std::to_string(rep) + " n=" +
                                             std::to_string(n));
        }

    for (double v : cfg.values)
        for (int n : cfg.sizes) {
            SweepAggregate a;
            a.value = v;
            a.size = n;
            std::vector<double> costs;
            for (const auto& p : res.points) {
                if (p.value != v || p.size != n) continue;
                ++a.total;
                a.mean_seconds += p.seconds;
                if (!p.feasible) continue;
                ++a.feasible;
                costs.push_back(p.cost_per_instance_h);
                a.mean_qoe += p.avg_qoe;
                a.mean_load += p.mean_load;
            }
            if (a.total) a.mean_seconds /= a.total;
            if (!costs.empty()) {
                double m = 0.0;
                for (double c : costs) m += c;
                m /= static_cast<double>(costs.size());
                double var = 0.0;
                for (double c : costs) var += (c - m) * (c - m);
                a.mean_cost_h = m;
                a.ci95_cost_h = costs.size() > 1 ? 1.96 * std::sqrt(var / (costs.size() - 1) / costs.size()) : 0.0;
                a.mean_qoe /= static_cast<double>(costs.size());
                a.mean_load /= static_cast<double>(costs.size());
            }
            res.aggregates.push_back(a);
        }
    return res;
}

/// Two-sided 95% Student t quantile.
inline double t_quantile_975(int dof) noexcept {
    static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                       2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086};
    if (dof < 1) return std::numeric_limits<double>::infinity();
    if (dof <= 20) return table[dof - 1];
    return dof <= 30 ? 2.042 : 1.96;
}

struct TrendReport {
    double value = 0.0;
    std::vector<int> pressured_sizes;
    std::vector<std::string> failures;
    bool ok() const noexcept { return failures.empty(); }
};

/// Size trend of one curve. A size is capacity-pressured when every
/// replication is feasible and saturates at least one cloud. Between
/// consecutive pressured sizes the paired per-replication change in mean
/// cost must not be significantly negative, and the curve must end higher
/// than it starts.
inline TrendReport size_trend(const SweepResult& r, double value) {
    TrendReport out;
    out.value = value;
    std::vector<int> sizes = r.config.sizes;
    std::sort(sizes.begin(), sizes.end());
    const int reps = r.config.replications;
    auto cost_at = [&](int n) {
        std::vector<std::optional<double>> c(static_cast<std::size_t>(reps));
        bool pressured = true;
        for (const auto& p : r.points) {
            if (p.value != value || p.size != n) continue;
            if (!p.feasible || p.saturated_clouds == 0) pressured = false;
            if (p.feasible) c[static_cast<std::size_t>(p.rep)] = p.cost_per_instance_h;
        }
        return std::make_pair(pressured, c);
    };
    std::vector<std::vector<std::optional<double>>> costs;
    for (int n : sizes) {
        auto [pressured, c] = cost_at(n);
        if (!pressured) continue;
        out.pressured_sizes.push_back(n);
        costs.push_back(std::move(c));
    }
    for (std::size_t i = 1; i < costs.size(); ++i) {
        std::vector<double> d;
        for (int k = 0; k < reps; ++k) {
            const auto& a = costs[i - 1][static_cast<std::size_t>(k)];
            const auto& b = costs[i][static_cast<std::size_t>(k)];
            if (a && b) d.push_back(*b - *a);
        }
        if (d.size() < 2) continue;
        double m = 0.0;
        for (double x : d) m += x;
        m /= static_cast<double>(d.size());
        double var = 0.0;
        for (double x : d) var += (x - m) * (x - m);
        const double se = std::sqrt(var / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
        if (m + t_quantile_975(static_cast<int>(d.size()) - 1) * se < 0.0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "mean cost falls from n=%d to n=%d by %.6f $/h (se %.6f)",
                          out.pressured_sizes[i - 1], out.pressured_sizes[i], -m, se);
            out.failures.push_back(buf);
        }
    }
    if (costs.size() >= 2) {
        auto mean = [&](const std::vector<std::optional<double>>& c) {
            double s = 0.0;
            int k = 0;
            for (const auto& x : c)
                if (x) {
                    s += *x;
                    ++k;
                }
            return k ? s / k : 0.0;
        };
        if (!(mean(costs.back()) > mean(costs.front())))
            out.failures.push_back("mean cost does not rise across the pressured sizes");
    } else {
        out.failures.push_back("fewer than two capacity-pressured sizes");
    }
    return out;
}

/// Sweep config from JSON. Every key is optional.
inline SweepConfig parse_sweep_config(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "seed",      "catalog",         "sizes",      "axis",       "values",  "replications",      "sigma",
        "q_min",     "l_min",           "l_max",      "load_lo",    "load_hi", "max_initial_vcpus", "mos_lo",
        "mos_hi",    "qoe_margin",      "cross_cloud_moves", "solver", "name", "output_dir"};
    if (!j.is_object()) throw ConfigError("sweep config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in sweep config");
    SweepConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("catalog")) {
            const auto& cj = j.at("catalog");
            for (auto it = cj.begin(); it != cj.end(); ++it)
                if (it.key() != "seed" && it.key() != "n_clouds" && it.key() != "total_flavors" &&
                    it.key() != "capacity_vcpus")
                    throw ConfigError("unknown key '" + it.key() + "' in sweep catalog");
            c.catalog.seed = cj.value("seed", c.catalog.seed);
            c.catalog.n_clouds = cj.value("n_clouds", c.catalog.n_clouds);
            c.catalog.total_flavors = cj.value("total_flavors", c.catalog.total_flavors);
            c.catalog.capacity_vcpus = cj.value("capacity_vcpus", c.catalog.capacity_vcpus);
        }
        c.sizes = j.value("sizes", c.sizes);
        if (j.contains("axis")) c.axis = parse_axis(j.at("axis").get<std::string>());
        c.values = j.value("values", c.values);
        c.replications = j.value("replications", c.replications);
        c.sigma = j.value("sigma", c.sigma);
        c.q_min = j.value("q_min", c.q_min);
        c.l_min = j.value("l_min", c.l_min);
        c.l_max = j.value("l_max", c.l_max);
        c.load_lo = j.value("load_lo", c.load_lo);
        c.load_hi = j.value("load_hi", c.load_hi);
        c.max_initial_vcpus = j.value("max_initial_vcpus", c.max_initial_vcpus);
        c.mos_lo = j.value("mos_lo", c.mos_lo);
        c.mos_hi = j.value("mos_hi", c.mos_hi);
        c.qoe_margin = j.value("qoe_margin", c.qoe_margin);
        c.cross_cloud_moves = j.value("cross_cloud_moves", c.cross_cloud_moves);
        if (j.contains("solver")) {
            const auto& sj = j.at("solver");
            c.budget.node_limit = sj.value("node_limit", c.budget.node_limit);
            c.budget.exact_max_instances = sj.value("exact_max_instances", c.budget.exact_max_instances);
            c.budget.bruteforce_cap = sj.value("bruteforce_cap", c.budget.bruteforce_cap);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad sweep config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Per-point table; deterministic per seed (solver timings are kept apart).
inline std::string sweep_points_csv(const SweepResult& r) {
    std::string out = std::string(to_string(r.config.axis)) +
                      ",size,rep,feasible,status,cost_per_instance_h,cost_per_instance_month,avg_qoe,mean_load,"
                      "saturated_clouds\n";
    char buf[256];
    for (const auto& p : r.points) {
        std::snprintf(buf, sizeof buf, "%g,%d,%d,%d,%s,%.6f,%.4f,%.4f,%.4f,%d\n", p.value, p.size, p.rep,
                      p.feasible ? 1 : 0, to_string(p.status), p.cost_per_instance_h,
                      p.cost_per_instance_h * kHoursPerMonth, p.avg_qoe, p.mean_load, p.saturated_clouds);
        out += buf;
    }
    return out;
}

/// Replication means with 95% intervals; monthly = hourly * 730.
inline std::string sweep_aggregates_csv(const SweepResult& r) {
    std::string out = "# monthly = hourly * 730\n" + std::string(to_string(r.config.axis)) +
                      ",size,feasible,total,mean_cost_h,ci95_cost_h,mean_cost_month,ci95_cost_month,mean_qoe,"
                      "mean_load\n";
    char buf[256];
    for (const auto& a : r.aggregates) {
        std::snprintf(buf, sizeof buf, "%g,%d,%d,%d,%.6f,%.6f,%.4f,%.4f,%.4f,%.4f\n", a.value, a.size, a.feasible,
                      a.total, a.mean_cost_h, a.ci95_cost_h, a.mean_cost_h * kHoursPerMonth,
                      a.ci95_cost_h * kHoursPerMonth, a.mean_qoe, a.mean_load);
        out += buf;
    }
    return out;
}

inline std::string sweep_timing_csv(const SweepResult& r) {
    std::string out = std::string(to_string(r.config.axis)) + ",size,rep,seconds,gap,budget_exceeded\n";
    char buf[160];
    for (const auto& p : r.points) {
        std::snprintf(buf, sizeof buf, "%g,%d,%d,%.4f,%.6f,%d\n", p.value, p.size, p.rep, p.seconds, p.gap,
                      p.budget_exceeded ? 1 : 0);
        out += buf;
    }
    return out;
}

} // namespace cdnslice
