#pragma once

// The flavor assignment problem: per-instance inputs, solve parameters,
// coefficient tables (cost, load, QoE per instance/flavor pair), solution
// records and the independent constraint checker.

#include "cdnslice/errors.hpp"
#include "cdnslice/flavor_catalog.hpp"
#include "cdnslice/qoe_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace cdnslice {

/// State of one running VNF instance at the start of a period.
struct InstanceSnapshot {
    std::string instance_id;
    std::string cloud_id;
    std::string current_flavor; // flavor id in the catalog
    double avg_load = 0.0;      // percent, [0,100]
    double sessions = 0.0;      // period-average parallel streams
    double measured_qoe = kBaseMos;

    void validate() const {
        if (instance_id.empty()) throw ValidationError("instance with empty id");
        if (avg_load < 0.0 || avg_load > 100.0)
            throw ValidationError("instance '" + instance_id + "' load outside [0,100]");
        if (sessions < 0.0) throw ValidationError("instance '" + instance_id + "' has negative sessions");
    }
};

struct SolveParams {
    double q_min = 4.0;
    double l_min = 25.0;
    double l_max = 90.0;
    double sigma = 0.1;
    double period_hours = 1.0 / 60.0;
    bool cross_cloud_moves = false;

    void validate() const {
        if (!(l_min >= 0.0 && l_min < l_max && l_max <= 100.0))
            throw ValidationError("load bounds must satisfy 0 <= l_min < l_max <= 100");
        if (!(q_min >= 1.0 && q_min <= kBaseMos)) throw ValidationError("q_min must lie in [1,5]");
        if (sigma < 0.0 || sigma > 1.0) throw ValidationError("sigma must lie in [0,1]");
        if (!(period_hours > 0.0)) throw ValidationError("period_hours must be positive");
    }
};

enum class SolveStatus { Optimal, Infeasible, HeuristicFeasible };

inline const char* to_string(SolveStatus s) noexcept {
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::HeuristicFeasible: return "HeuristicFeasible";
    }
    return "?";
}

struct AssignmentSolution {
    std::map<std::string, std::string> assignment; // instance id -> flavor id
    double total_cost = 0.0;                       // $/h
    double avg_qoe = 0.0;                          // raw mean of the chosen Q_ij
    std::map<std::string, double> per_instance_load;
    SolveStatus status = SolveStatus::Infeasible;
    double gap = 0.0; // relative to the coupling-relaxed lower bound
    bool budget_exceeded = false;
    std::int64_t nodes = 0;

    bool feasible() const noexcept { return status != SolveStatus::Infeasible; }
};

/// vCPUs left in `cloud` under a solution's flavor choices.
inline std::int64_t remaining_capacity(const CloudDomain& cloud, const Catalog& catalog,
                                       const AssignmentSolution& solution) {
    std::vector<std::string> ids;
    for (const auto& [inst, flavor] : solution.assignment) ids.push_back(flavor);
    return remaining_capacity(cloud, catalog, ids);
}

// Comparison slack for load and QoE constraints.
inline constexpr double kConstraintTol = 1e-9;

/// Integer cost grain used for exact objective comparisons (nano-dollars/h).
inline std::int64_t cost_ticks(double cost_per_hour) noexcept {
    return std::llround(cost_per_hour * 1e9);
}

/// Estimated load of an instance moved from its current flavor to one with
/// `target_cpu` cores, assuming throughput scales linearly with cores.
inline double scaled_load(double current_load, int current_cpu, int target_cpu) noexcept {
    return current_load * static_cast<double>(current_cpu) / static_cast<double>(target_cpu);
}

/// Dense coefficient tables, rows ordered by instance id.
struct Coefficients {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<std::size_t> row_of_input; // input index -> row
    std::vector<std::string> instance_ids; // by row
    std::vector<std::size_t> instance_cloud; // by row, catalog cloud index
    std::vector<double> cost;               // by flavor
    std::vector<std::int64_t> ticks;        // by flavor
    std::vector<std::size_t> flavor_rank;   // by flavor, position in id order
    std::vector<double> load;               // n*p
    std::vector<double> qoe;                // n*p
    std::vector<std::uint8_t> admissible;   // n*p: placement, rho_max and positivity

    double l(std::size_t i, std::size_t j) const { return load[i * p + j]; }
    double q(std::size_t i, std::size_t j) const { return qoe[i * p + j]; }
    bool ok(std::size_t i, std::size_t j) const { return admissible[i * p + j] != 0; }
};

inline Coefficients build_coefficients(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                       const SolveParams& params) {
    Coefficients c;
    c.n = instances.size();
    c.p = catalog.flavors().size();

    std::vector<std::size_t> order(c.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return instances[a].instance_id < instances[b].instance_id; });
    c.row_of_input.resize(c.n);
    for (std::size_t r = 0; r < c.n; ++r) c.row_of_input[order[r]] = r;
    for (std::size_t r = 1; r < c.n; ++r)
        if (instances[order[r]].instance_id == instances[order[r - 1]].instance_id)
            throw ValidationError("duplicate instance id '" + instances[order[r]].instance_id + "'");

    std::vector<std::size_t> by_id(c.p);
    std::iota(by_id.begin(), by_id.end(), 0);
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return catalog.flavor(a).id < catalog.flavor(b).id; });
    c.flavor_rank.resize(c.p);
    for (std::size_t r = 0; r < c.p; ++r) c.flavor_rank[by_id[r]] = r;

    c.cost.resize(c.p);
    c.ticks.resize(c.p);
    std::vector<double> eta(c.p);
    for (std::size_t j = 0; j < c.p; ++j) {
        c.cost[j] = catalog.flavor(j).cost_per_hour;
        c.ticks[j] = cost_ticks(c.cost[j]);
        eta[j] = catalog.eta(j);
    }

    c.load.assign(c.n * c.p, 0.0);
    c.qoe.assign(c.n * c.p, 0.0);
    c.admissible.assign(c.n * c.p, 0);
    c.instance_ids.resize(c.n);
    c.instance_cloud.resize(c.n);
    for (std::size_t r = 0; r < c.n; ++r) {
        const auto& inst = instances[order[r]];
        inst.validate();
        const std::size_t cur = catalog.flavor_index(inst.current_flavor);
        const int cur_cpu = catalog.flavor(cur).vcpu;
        c.instance_ids[r] = inst.instance_id;
        c.instance_cloud[r] = catalog.cloud_index_of_flavor(cur);
        for (std::size_t j = 0; j < c.p; ++j) {
            const auto& f = catalog.flavor(j);
            const double lij = scaled_load(inst.avg_load, cur_cpu, f.vcpu);
            const double qij = mos_flavored(inst.sessions, f.vcpu, eta[j], params.sigma);
            const bool placement = params.cross_cloud_moves || catalog.cloud_index_of_flavor(j) == c.instance_cloud[r];
            const bool under_cap = inst.sessions <= static_cast<double>(rho_max(f.vcpu));
            c.load[r * c.p + j] = lij;
            c.qoe[r * c.p + j] = qij;
            c.admissible[r * c.p + j] = placement && under_cap && c.cost[j] > 0.0 && qij > 0.0 && lij >= 0.0;
        }
    }
    return c;
}

inline bool load_within(double load, double l_min, double l_max) noexcept {
    return load <= l_max + kConstraintTol && load >= l_min - kConstraintTol;
}

/// Builds a solution record from per-row flavor choices.
inline AssignmentSolution make_solution(const Coefficients& c, const Catalog& catalog,
                                        const std::vector<std::size_t>& choice, SolveStatus status) {
    AssignmentSolution s;
    s.status = status;
    double qsum = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) {
        const std::size_t j = choice[i];
        s.assignment[c.instance_ids[i]] = catalog.flavor(j).id;
        s.per_instance_load[c.instance_ids[i]] = c.l(i, j);
        s.total_cost += c.cost[j];
        qsum += c.q(i, j);
    }
    s.avg_qoe = c.n ? qsum / static_cast<double>(c.n) : 0.0;
    return s;
}

inline AssignmentSolution infeasible_solution() {
    AssignmentSolution s;
    s.status = SolveStatus::Infeasible;
    return s;
}

// ---------------------------------------------------------------------------
// Constraint referee

enum class Constraint { C1, C2, C3, C4, C5, C6, C7, C8, Placement };

inline const char* to_string(Constraint c) noexcept {
    switch (c) {
    case Constraint::C1: return "C1";
    case Constraint::C2: return "C2";
    case Constraint::C3: return "C3";
    case Constraint::C4: return "C4";
    case Constraint::C5: return "C5";
    case Constraint::C6: return "C6";
    case Constraint::C7: return "C7";
    case Constraint::C8: return "C8";
    case Constraint::Placement: return "Placement";
    }
    return "?";
}

struct Violation {
    Constraint constraint;
    std::string detail;
};

/// Dense decision matrix x[i][j] in input-instance order and catalog flavor order.
using DecisionMatrix = std::vector<std::vector<double>>;

/// Checks every model constraint for a (possibly fractional) decision matrix.
/// Recomputes loads and QoE from the model formulas directly rather than
/// through Coefficients, so it can referee any solver.
inline std::vector<Violation> check_feasibility(const DecisionMatrix& x, const std::vector<InstanceSnapshot>& instances,
                                                const Catalog& catalog, const SolveParams& params) {
    std::vector<Violation> out;
    const std::size_t n = instances.size();
    const std::size_t p = catalog.flavors().size();
    if (x.size() != n) {
        out.push_back({Constraint::C2, "decision matrix has " + std::to_string(x.size()) + " rows for " +
                                           std::to_string(n) + " instances"});
        return out;
    }

    double total_assigned = 0.0;
    double qoe_sum = 0.0;
    std::vector<double> cloud_used(catalog.clouds().size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& inst = instances[i];
        if (x[i].size() != p) {
            out.push_back({Constraint::C1, inst.instance_id + ": row has wrong width"});
            continue;
        }
        auto cur = catalog.find_flavor(inst.current_flavor);
        if (!cur) {
            out.push_back({Constraint::C7, inst.instance_id + ": unknown current flavor"});
            continue;
        }
        const int cur_cpu = catalog.flavor(*cur).vcpu;
        const auto home_cloud = catalog.cloud_index_of_flavor(*cur);

        double row_sum = 0.0;
        double load = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double xij = x[i][j];
            if (xij != 0.0 && xij != 1.0)
                out.push_back({Constraint::C8, inst.instance_id + ": x=" + std::to_string(xij) + " for " +
                                                   catalog.flavor(j).id});
            if (xij == 0.0) continue;
            const auto& f = catalog.flavor(j);
            const double lij = inst.avg_load * cur_cpu / f.vcpu;
            const double eta = normalized_cost(f, catalog.cloud(catalog.cloud_index_of_flavor(j)), catalog);
            const double qij = kBaseMos - kQuadCoeff * std::pow(inst.sessions / f.vcpu, 2) + kBaseMos * params.sigma * eta;
            row_sum += xij;
            load += lij * xij;
            qoe_sum += qij * xij;
            cloud_used[catalog.cloud_index_of_flavor(j)] += f.vcpu * xij;
            if (!(f.cost_per_hour > 0.0) || !(qij > 0.0) || lij < 0.0 ||
                inst.sessions > static_cast<double>(rho_max(f.vcpu)))
                out.push_back({Constraint::C7, inst.instance_id + " on " + f.id + ": non-positive coefficient"});
            if (!params.cross_cloud_moves && catalog.cloud_index_of_flavor(j) != home_cloud)
                out.push_back({Constraint::Placement, inst.instance_id + " moved to cloud " + f.cloud_id});
        }
        total_assigned += row_sum;
        if (std::abs(row_sum - 1.0) > kConstraintTol) {
            out.push_back({Constraint::C1, inst.instance_id + ": " + std::to_string(row_sum) + " flavors assigned"});
            continue;
        }
        if (load > params.l_max + kConstraintTol)
            out.push_back({Constraint::C3, inst.instance_id + ": load " + std::to_string(load) + " > " +
                                               std::to_string(params.l_max)});
        if (load < params.l_min - kConstraintTol)
            out.push_back({Constraint::C4, inst.instance_id + ": load " + std::to_string(load) + " < " +
                                               std::to_string(params.l_min)});
    }
    if (std::abs(total_assigned - static_cast<double>(n)) > kConstraintTol)
        out.push_back({Constraint::C2, std::to_string(total_assigned) + " assignments for " + std::to_string(n) +
                                           " instances"});
    if (qoe_sum < static_cast<double>(n) * params.q_min - kConstraintTol * std::max<double>(1.0, static_cast<double>(n)))
        out.push_back({Constraint::C5, "mean QoE " + std::to_string(n ? qoe_sum / n : 0.0) + " < " +
                                           std::to_string(params.q_min)});
    for (std::size_t k = 0; k < cloud_used.size(); ++k) {
        const auto& cloud = catalog.cloud(k);
        if (cloud_used[k] > cloud.capacity_vcpus + kConstraintTol)
            out.push_back({Constraint::C6, cloud.id + ": " + std::to_string(cloud_used[k]) + " vCPUs > " +
                                               std::to_string(cloud.capacity_vcpus)});
    }
    return out;
}

/// Converts a solution's map into a decision matrix aligned with `instances`.
inline DecisionMatrix to_decision_matrix(const std::map<std::string, std::string>& assignment,
                                         const std::vector<InstanceSnapshot>& instances, const Catalog& catalog) {
    DecisionMatrix x(instances.size(), std::vector<double>(catalog.flavors().size(), 0.0));
    for (std::size_t i = 0; i < instances.size(); ++i) {
        auto it = assignment.find(instances[i].instance_id);
        if (it == assignment.end()) continue;
        if (auto j = catalog.find_flavor(it->second)) x[i][*j] = 1.0;
    }
    return x;
}

inline std::vector<Violation> check_feasibility(const std::map<std::string, std::string>& assignment,
                                                const std::vector<InstanceSnapshot>& instances,
                                                const Catalog& catalog, const SolveParams& params) {
    auto out = check_feasibility(to_decision_matrix(assignment, instances, catalog), instances, catalog, params);
    for (const auto& [inst, flavor] : assignment) {
        const bool known = std::any_of(instances.begin(), instances.end(),
                                       [&](const InstanceSnapshot& s) { return s.instance_id == inst; });
        if (!known) out.push_back({Constraint::C2, "assignment names unknown instance '" + inst + "'"});
        else if (!catalog.find_flavor(flavor))
            out.push_back({Constraint::C1, inst + " assigned unknown flavor '" + flavor + "'"});
    }
    return out;
}

inline std::vector<Violation> check_feasibility(const AssignmentSolution& solution,
                                                const std::vector<InstanceSnapshot>& instances,
                                                const Catalog& catalog, const SolveParams& params) {
    return check_feasibility(solution.assignment, instances, catalog, params);
}

} // namespace cdnslice
