#pragma once

// Solvers for the flavor assignment problem: exhaustive enumeration (the
// reference oracle), depth-first branch and bound, and a greedy+repair
// heuristic for slices beyond the exact budget.
//
// All solvers share one tie-break: among equal-cost assignments, the one whose
// flavor ids, listed in instance-id order, compare lexicographically smallest.

#include "cdnslice/edm_problem.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace cdnslice {

struct SolverBudget {
    std::uint64_t bruteforce_cap = 10'000'000;     // max enumerated assignments
    std::size_t exact_max_instances = 60;          // above this, use the heuristic
    std::int64_t node_limit = 2'000'000;           // branch and bound nodes
};

namespace detail {

struct Incumbent {
    std::int64_t ticks = std::numeric_limits<std::int64_t>::max();
    std::vector<std::size_t> ranks; // flavor rank per row
    std::vector<std::size_t> choice;
    bool valid() const noexcept { return !choice.empty() || ticks != std::numeric_limits<std::int64_t>::max(); }
};

inline bool better(std::int64_t ticks, const std::vector<std::size_t>& ranks, const Incumbent& inc) {
    if (ticks != inc.ticks) return ticks < inc.ticks;
    return ranks < inc.ranks;
}

/// Full constraint check on row choices using the coefficient tables.
inline bool choice_feasible(const Coefficients& c, const Catalog& catalog, const SolveParams& params,
                            const std::vector<std::size_t>& choice) {
    double qsum = 0.0;
    std::vector<std::int64_t> used(catalog.clouds().size(), 0);
    for (std::size_t i = 0; i < c.n; ++i) {
        const std::size_t j = choice[i];
        if (!c.ok(i, j) || !load_within(c.l(i, j), params.l_min, params.l_max)) return false;
        qsum += c.q(i, j);
        used[catalog.cloud_index_of_flavor(j)] += catalog.flavor(j).vcpu;
    }
    if (qsum < static_cast<double>(c.n) * params.q_min - kConstraintTol * std::max<double>(1.0, static_cast<double>(c.n)))
        return false;
    for (std::size_t k = 0; k < used.size(); ++k)
        if (used[k] > catalog.cloud(k).capacity_vcpus) return false;
    return true;
}

inline std::int64_t choice_ticks(const Coefficients& c, const std::vector<std::size_t>& choice) {
    std::int64_t t = 0;
    for (std::size_t j : choice) t += c.ticks[j];
    return t;
}

inline std::vector<std::size_t> choice_ranks(const Coefficients& c, const std::vector<std::size_t>& choice) {
    std::vector<std::size_t> r(choice.size());
    for (std::size_t i = 0; i < choice.size(); ++i) r[i] = c.flavor_rank[choice[i]];
    return r;
}

/// Per-row flavors satisfying the row-local constraints (admissibility, C3,
/// C4), ordered by (cost, flavor id).
inline std::vector<std::vector<std::size_t>> row_candidates(const Coefficients& c, const SolveParams& params) {
    std::vector<std::vector<std::size_t>> cand(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
        for (std::size_t j = 0; j < c.p; ++j)
            if (c.ok(i, j) && load_within(c.l(i, j), params.l_min, params.l_max)) cand[i].push_back(j);
        std::sort(cand[i].begin(), cand[i].end(), [&](std::size_t a, std::size_t b) {
            if (c.ticks[a] != c.ticks[b]) return c.ticks[a] < c.ticks[b];
            return c.flavor_rank[a] < c.flavor_rank[b];
        });
    }
    return cand;
}

/// Lower bound in ticks from dualizing the mean-QoE constraint (price lambda)
/// and each cloud's vCPU capacity (prices mu_k):
///   sum_i min_j (ticks_j - lambda q_ij + mu_k(j) vcpu_j) + lambda needed - sum_k mu_k cap_k.
/// A line search on lambda alone seeds Polyak subgradient steps toward `target`.
/// At zero prices this is the plain row-minimum bound.
inline std::int64_t lagrangian_bound(const Coefficients& c, const Catalog& catalog,
                                     const std::vector<std::vector<std::size_t>>& cand, double needed,
                                     std::int64_t target, int iterations = 300) {
    const std::size_t nclouds = catalog.clouds().size();
    std::vector<double> mu(nclouds, 0.0), gk(nclouds);
    double lambda = 0.0, gq = 0.0;
    auto dual = [&](double lam, bool grad) {
        double total = lam * needed;
        for (std::size_t k = 0; k < nclouds; ++k) total -= mu[k] * catalog.cloud(k).capacity_vcpus;
        if (grad) {
            gq = needed;
            for (std::size_t k = 0; k < nclouds; ++k) gk[k] = -catalog.cloud(k).capacity_vcpus;
        }
        for (std::size_t i = 0; i < c.n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t j : cand[i]) {
                const auto k = catalog.cloud_index_of_flavor(j);
                const double r = static_cast<double>(c.ticks[j]) - lam * c.q(i, j) + mu[k] * catalog.flavor(j).vcpu;
                if (r < best) {
                    best = r;
                    arg = j;
                }
            }
            total += best;
            if (grad) {
                gq -= c.q(i, arg);
                gk[catalog.cloud_index_of_flavor(arg)] += catalog.flavor(arg).vcpu;
            }
        }
        return total;
    };

    std::int64_t max_ticks = 0;
    for (const auto& row : cand)
        for (std::size_t j : row) max_ticks = std::max(max_ticks, c.ticks[j]);
    // concave in lambda; beyond max_ticks per MOS hundredth no price can help
    double lo = 0.0, hi = static_cast<double>(max_ticks) * 100.0;
    for (int it = 0; it < 100; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (dual(m1, false) < dual(m2, false))
            lo = m1;
        else
            hi = m2;
    }
    double best = dual(0.0, false);
    const double dl = dual(lo, false);
    if (dl > best) {
        best = dl;
        lambda = lo;
    }

    double theta = 2.0;
    int stale = 0;
    for (int it = 0; it < iterations; ++it) {
        const double v = dual(lambda, true);
        if (v > best + 1e-9 * std::abs(best)) {
            best = v;
            stale = 0;
        } else if (++stale >= 20) {
            theta /= 2.0;
            stale = 0;
        }
        double norm2 = gq * gq;
        for (std::size_t k = 0; k < nclouds; ++k) {
            if (mu[k] == 0.0 && gk[k] < 0.0) gk[k] = 0.0; // projected
            norm2 += gk[k] * gk[k];
        }
        if (norm2 == 0.0 || static_cast<double>(target) <= best) break;
        const double step = theta * (static_cast<double>(target) - v) / norm2;
        lambda = std::max(0.0, lambda + step * gq);
        for (std::size_t k = 0; k < nclouds; ++k) mu[k] = std::max(0.0, mu[k] + step * gk[k]);
    }
    // round down with slack so floating error never overstates the bound;
    // the zero-price value is exact in integers
    std::int64_t rowmin = 0;
    for (const auto& row : cand) rowmin += c.ticks[row.front()];
    return std::max(rowmin, static_cast<std::int64_t>(std::floor(best - 1e-9 * std::abs(best) - 1e-6)));
}

/// Converts a warm-start solution to row choices if it is feasible here.
inline std::optional<std::vector<std::size_t>> warm_choice(const AssignmentSolution* warm, const Coefficients& c,
                                                           const Catalog& catalog, const SolveParams& params) {
    if (!warm || !warm->feasible()) return std::nullopt;
    std::vector<std::size_t> choice(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
        auto it = warm->assignment.find(c.instance_ids[i]);
        if (it == warm->assignment.end()) return std::nullopt;
        auto j = catalog.find_flavor(it->second);
        if (!j) return std::nullopt;
        choice[i] = *j;
    }
    if (!choice_feasible(c, catalog, params, choice)) return std::nullopt;
    return choice;
}

} // namespace detail

/// Exhaustive enumeration of all p^n assignments. Reference oracle.
inline AssignmentSolution solve_bruteforce(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                           const SolveParams& params, const SolverBudget& budget = {}) {
    params.validate();
    const auto c = build_coefficients(instances, catalog, params);
    if (c.n == 0) return make_solution(c, catalog, {}, SolveStatus::Optimal);

    long double combos = 1.0L;
    for (std::size_t i = 0; i < c.n; ++i) combos *= static_cast<long double>(c.p);
    if (combos > static_cast<long double>(budget.bruteforce_cap))
        throw TooLarge("brute force would enumerate " + std::to_string(static_cast<double>(combos)) +
                       " assignments (cap " + std::to_string(budget.bruteforce_cap) + ")");

    detail::Incumbent best;
    std::vector<std::size_t> choice(c.n, 0);
    std::int64_t visited = 0;
    while (true) {
        ++visited;
        if (detail::choice_feasible(c, catalog, params, choice)) {
            const auto ticks = detail::choice_ticks(c, choice);
            const auto ranks = detail::choice_ranks(c, choice);
            if (best.choice.empty() || detail::better(ticks, ranks, best)) best = {ticks, ranks, choice};
        }
        std::size_t pos = c.n;
        while (pos > 0) {
            --pos;
            if (++choice[pos] < c.p) break;
            choice[pos] = 0;
            if (pos == 0) {
                pos = c.n; // wrapped around
                break;
            }
        }
        if (pos == c.n) break;
    }
    if (best.choice.empty()) {
        auto s = infeasible_solution();
        s.nodes = visited;
        return s;
    }
    auto s = make_solution(c, catalog, best.choice, SolveStatus::Optimal);
    s.nodes = visited;
    return s;
}

inline AssignmentSolution solve_heuristic(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                          const SolveParams& params,
                                          const AssignmentSolution* warm_start = nullptr);

namespace detail {

class BranchAndBound {
public:
    BranchAndBound(const Coefficients& c, const Catalog& catalog, const SolveParams& params, std::int64_t node_limit)
        : c_(c), catalog_(catalog), params_(params), node_limit_(node_limit), cand_(row_candidates(c, params)),
          used_(catalog.clouds().size(), 0), choice_(c.n), ranks_(c.n) {
        suffix_min_.assign(c.n + 1, 0);
        suffix_qmax_.assign(c.n + 1, 0.0);
        for (std::size_t i = c.n; i-- > 0;) {
            if (cand_[i].empty()) {
                infeasible_row_ = true;
                continue;
            }
            double qmax = -std::numeric_limits<double>::infinity();
            for (std::size_t j : cand_[i]) qmax = std::max(qmax, c.q(i, j));
            suffix_min_[i] = suffix_min_[i + 1] + c.ticks[cand_[i].front()];
            suffix_qmax_[i] = suffix_qmax_[i + 1] + qmax;
        }
        qoe_needed_ = static_cast<double>(c.n) * params.q_min -
                      kConstraintTol * std::max<double>(1.0, static_cast<double>(c.n));
    }

    void seed(const std::vector<std::size_t>& choice) {
        const auto ticks = choice_ticks(c_, choice);
        const auto ranks = choice_ranks(c_, choice);
        if (best_.choice.empty() || better(ticks, ranks, best_)) best_ = {ticks, ranks, choice};
    }

    void run() {
        if (infeasible_row_) return;
        if (suffix_qmax_[0] < qoe_needed_) return;
        dfs(0, 0, 0.0);
    }

    bool exhausted() const noexcept { return nodes_ >= node_limit_; }
    std::int64_t nodes() const noexcept { return nodes_; }
    std::int64_t root_bound() const noexcept { return infeasible_row_ ? 0 : suffix_min_[0]; }
    const Incumbent& best() const noexcept { return best_; }

private:
    // Prefix of the current path compared with the incumbent's prefix.
    bool prefix_not_smaller(std::size_t depth) const {
        for (std::size_t i = 0; i < depth; ++i) {
            if (ranks_[i] != best_.ranks[i]) return ranks_[i] > best_.ranks[i];
        }
        return false; // equal prefix may still improve further down
    }

    void dfs(std::size_t depth, std::int64_t ticks, double qsum) {
        if (++nodes_ >= node_limit_) return;
        if (depth == c_.n) {
            if (qsum < qoe_needed_) return;
            if (best_.choice.empty() || better(ticks, ranks_, best_)) best_ = {ticks, ranks_, choice_};
            return;
        }
        for (std::size_t j : cand_[depth]) {
            if (nodes_ >= node_limit_) return;
            const auto k = catalog_.cloud_index_of_flavor(j);
            const int cpu = catalog_.flavor(j).vcpu;
            if (used_[k] + cpu > catalog_.cloud(k).capacity_vcpus) continue;
            const std::int64_t t = ticks + c_.ticks[j];
            const std::int64_t bound = t + suffix_min_[depth + 1];
            if (!best_.choice.empty()) {
                // candidates are cost ordered: once the bound passes the
                // incumbent no later sibling can win either
                if (bound > best_.ticks) return;
                if (bound == best_.ticks) {
                    ranks_[depth] = c_.flavor_rank[j];
                    if (prefix_not_smaller(depth + 1)) continue;
                }
            }
            const double q = qsum + c_.q(depth, j);
            if (q + suffix_qmax_[depth + 1] < qoe_needed_) continue;
            used_[k] += cpu;
            choice_[depth] = j;
            ranks_[depth] = c_.flavor_rank[j];
            dfs(depth + 1, t, q);
            used_[k] -= cpu;
        }
    }

    const Coefficients& c_;
    const Catalog& catalog_;
    const SolveParams& params_;
    std::int64_t node_limit_;
    std::vector<std::vector<std::size_t>> cand_;
    std::vector<std::int64_t> suffix_min_;
    std::vector<double> suffix_qmax_;
    std::vector<std::int64_t> used_;
    std::vector<std::size_t> choice_;
    std::vector<std::size_t> ranks_;
    double qoe_needed_ = 0.0;
    bool infeasible_row_ = false;
    std::int64_t nodes_ = 0;
    Incumbent best_;
};

} // namespace detail

/// Depth-first branch and bound over instances in id order. The node bound
/// is the path cost plus each remaining instance's cheapest row-feasible
/// flavor, relaxing the coupling constraints (mean QoE, cloud capacity).
/// When the node limit is hit the best incumbent is returned with its gap;
/// a heuristic solution seeds the search in that case.
inline AssignmentSolution solve_exact(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                      const SolveParams& params, const SolverBudget& budget = {},
                                      const AssignmentSolution* warm_start = nullptr) {
    params.validate();
    const auto c = build_coefficients(instances, catalog, params);
    if (c.n == 0) return make_solution(c, catalog, {}, SolveStatus::Optimal);

    detail::BranchAndBound bnb(c, catalog, params, budget.node_limit);
    if (auto w = detail::warm_choice(warm_start, c, catalog, params)) bnb.seed(*w);
    bnb.run();

    if (!bnb.exhausted()) {
        if (bnb.best().choice.empty()) {
            auto s = infeasible_solution();
            s.nodes = bnb.nodes();
            return s;
        }
        auto s = make_solution(c, catalog, bnb.best().choice, SolveStatus::Optimal);
        s.nodes = bnb.nodes();
        return s;
    }

    // Budget exceeded: fall back to the better of incumbent and heuristic.
    auto h = solve_heuristic(instances, catalog, params, warm_start);
    if (h.feasible()) {
        if (auto hc = detail::warm_choice(&h, c, catalog, params)) bnb.seed(*hc);
    }
    AssignmentSolution s;
    if (bnb.best().choice.empty()) {
        s = infeasible_solution();
    } else {
        s = make_solution(c, catalog, bnb.best().choice, SolveStatus::HeuristicFeasible);
        const double needed = static_cast<double>(c.n) * params.q_min -
                              kConstraintTol * std::max<double>(1.0, static_cast<double>(c.n));
        const auto cand = detail::row_candidates(c, params);
        const auto dual = detail::lagrangian_bound(c, catalog, cand, needed, bnb.best().ticks);
        const double lb = static_cast<double>(std::max(bnb.root_bound(), dual));
        const double ub = static_cast<double>(bnb.best().ticks);
        s.gap = ub > 0.0 ? (ub - lb) / ub : 0.0;
    }
    s.budget_exceeded = true;
    s.nodes = bnb.nodes();
    return s;
}

/// Greedy cheapest-admissible assignment followed by capacity and mean-QoE
/// repair and a downgrade pass. Reports the gap to the better of the
/// coupling-relaxed and Lagrangian bounds.
inline AssignmentSolution solve_heuristic(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                          const SolveParams& params, const AssignmentSolution* warm_start) {
    params.validate();
    const auto c = build_coefficients(instances, catalog, params);
    if (c.n == 0) return make_solution(c, catalog, {}, SolveStatus::Optimal);
    const auto cand = detail::row_candidates(c, params);
    for (const auto& row : cand)
        if (row.empty()) return infeasible_solution();

    const std::size_t nclouds = catalog.clouds().size();
    std::vector<std::int64_t> used(nclouds, 0);
    std::vector<std::size_t> choice(c.n);
    auto cloud_of = [&](std::size_t j) { return catalog.cloud_index_of_flavor(j); };
    auto cpu_of = [&](std::size_t j) { return static_cast<std::int64_t>(catalog.flavor(j).vcpu); };
    auto cap_of = [&](std::size_t k) { return static_cast<std::int64_t>(catalog.cloud(k).capacity_vcpus); };

    // Greedy: cheapest row-feasible flavor that still fits; otherwise the
    // cheapest outright and let the capacity repair sort it out.
    for (std::size_t i = 0; i < c.n; ++i) {
        std::size_t pick = cand[i].front();
        for (std::size_t j : cand[i]) {
            if (used[cloud_of(j)] + cpu_of(j) <= cap_of(cloud_of(j))) {
                pick = j;
                break;
            }
        }
        choice[i] = pick;
        used[cloud_of(pick)] += cpu_of(pick);
    }

    auto fits_after_move = [&](std::size_t from, std::size_t to) {
        const auto kt = cloud_of(to);
        std::int64_t after = used[kt] + cpu_of(to);
        if (cloud_of(from) == kt) after -= cpu_of(from);
        return after <= cap_of(kt);
    };
    auto apply_move = [&](std::size_t i, std::size_t to) {
        used[cloud_of(choice[i])] -= cpu_of(choice[i]);
        used[cloud_of(to)] += cpu_of(to);
        choice[i] = to;
    };

    // Capacity repair: move instances out of over-committed clouds by the
    // cheapest cost increase. Within-cloud moves must shrink the footprint.
    for (;;) {
        std::optional<std::size_t> over;
        for (std::size_t k = 0; k < nclouds; ++k)
            if (used[k] > cap_of(k)) {
                over = k;
                break;
            }
        if (!over) break;
        std::int64_t best_delta = std::numeric_limits<std::int64_t>::max();
        std::size_t best_i = 0, best_j = 0;
        bool found = false;
        for (std::size_t i = 0; i < c.n; ++i) {
            if (cloud_of(choice[i]) != *over) continue;
            for (std::size_t j : cand[i]) {
                if (j == choice[i]) continue;
                if (cloud_of(j) == *over && cpu_of(j) >= cpu_of(choice[i])) continue;
                if (cloud_of(j) != *over && !fits_after_move(choice[i], j)) continue;
                const std::int64_t delta = c.ticks[j] - c.ticks[choice[i]];
                if (!found || delta < best_delta) {
                    best_delta = delta;
                    best_i = i;
                    best_j = j;
                    found = true;
                }
            }
        }
        if (!found) return infeasible_solution();
        apply_move(best_i, best_j);
    }

    // Mean-QoE repair: buy QoE at the lowest marginal price per MOS point.
    const double needed = static_cast<double>(c.n) * params.q_min -
                          kConstraintTol * std::max<double>(1.0, static_cast<double>(c.n));
    double qsum = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) qsum += c.q(i, choice[i]);
    while (qsum < needed) {
        bool found = false;
        double best_score = 0.0;
        std::size_t best_i = 0, best_j = 0;
        for (std::size_t i = 0; i < c.n; ++i) {
            const double q0 = c.q(i, choice[i]);
            for (std::size_t j : cand[i]) {
                const double dq = c.q(i, j) - q0;
                if (dq <= 0.0 || !fits_after_move(choice[i], j)) continue;
                const double dc = static_cast<double>(c.ticks[j] - c.ticks[choice[i]]);
                // free or cheaper upgrades first, then cost per unit QoE
                const double score = dc <= 0.0 ? dc - dq * 1e18 : dc / dq;
                if (!found || score < best_score) {
                    best_score = score;
                    best_i = i;
                    best_j = j;
                    found = true;
                }
            }
        }
        if (!found) return infeasible_solution();
        qsum += c.q(best_i, best_j) - c.q(best_i, choice[best_i]);
        apply_move(best_i, best_j);
    }

    // Downgrade pass: take any cheaper flavor that keeps every constraint.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < c.n; ++i) {
            const std::size_t cur = choice[i];
            for (std::size_t j : cand[i]) {
                if (c.ticks[j] >= c.ticks[cur]) break;
                if (!fits_after_move(cur, j)) continue;
                const double q = qsum - c.q(i, cur) + c.q(i, j);
                if (q < needed) continue;
                qsum = q;
                apply_move(i, j);
                changed = true;
                break;
            }
        }
    }

    std::int64_t lb = 0;
    for (const auto& row : cand) lb += c.ticks[row.front()];
    lb = std::max(lb, detail::lagrangian_bound(c, catalog, cand, needed, detail::choice_ticks(c, choice)));

    auto ticks = detail::choice_ticks(c, choice);
    if (auto w = detail::warm_choice(warm_start, c, catalog, params)) {
        const detail::Incumbent mine{ticks, detail::choice_ranks(c, choice), choice};
        if (detail::better(detail::choice_ticks(c, *w), detail::choice_ranks(c, *w), mine)) {
            choice = *w;
            ticks = detail::choice_ticks(c, choice);
        }
    }

    const bool proven = ticks == lb;
    auto s = make_solution(c, catalog, choice, proven ? SolveStatus::Optimal : SolveStatus::HeuristicFeasible);
    s.gap = ticks > 0 ? static_cast<double>(ticks - lb) / static_cast<double>(ticks) : 0.0;
    return s;
}

/// Exact solve within the budget, heuristic beyond it.
inline AssignmentSolution solve(const std::vector<InstanceSnapshot>& instances, const Catalog& catalog,
                                const SolveParams& params, const SolverBudget& budget = {},
                                const AssignmentSolution* warm_start = nullptr) {
    if (instances.size() <= budget.exact_max_instances)
        return solve_exact(instances, catalog, params, budget, warm_start);
    return solve_heuristic(instances, catalog, params, warm_start);
}

} // namespace cdnslice
