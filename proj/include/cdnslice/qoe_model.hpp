#pragma once

// Empirical QoE model: MOS of a streaming server as a function of the number
// of parallel video streams, its flavored generalization, and a playout-based
// per-user MOS surrogate.

#include "cdnslice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace cdnslice {

inline constexpr double kBaseMos = 5.0;
inline constexpr double kQuadCoeff = 1.046e-8;

struct QoeModelParams {
    double base_mos = kBaseMos;
    double quad_coeff = kQuadCoeff;
    double sigma = 0.1;
    // Fitted so that 2.5 stalls/min at a 0.29 stall ratio lands on the
    // single-vCPU curve at 12000 streams (3.4938).
    double playout_alpha = 0.3125;
    double playout_beta = 2.5;

    void validate() const {
        if (base_mos != kBaseMos) throw ValidationError("base_mos must be 5.0");
        if (!(quad_coeff > 0.0)) throw ValidationError("quad_coeff must be positive");
        if (sigma < 0.0 || sigma > 1.0) throw ValidationError("sigma must lie in [0,1]");
        if (playout_alpha < 0.0 || playout_beta < 0.0)
            throw ValidationError("playout coefficients must be non-negative");
    }
};

struct PlayoutReport {
    double stall_count_per_min = 0.0;
    double stall_time_ratio = 0.0;
    double avg_qp = 0.0; // carried for interface fidelity, unused by the surrogate
    double window_seconds = 16.0;

    void validate() const {
        if (stall_time_ratio < 0.0 || stall_time_ratio > 1.0)
            throw ValidationError("stall_time_ratio must lie in [0,1]");
        if (!(window_seconds > 0.0)) throw ValidationError("window_seconds must be positive");
        if (stall_count_per_min < 0.0) throw ValidationError("stall_count_per_min must be non-negative");
    }
};

inline double clamp_mos(double mos) noexcept { return std::clamp(mos, 1.0, kBaseMos); }

/// MOS of a single-vCPU server carrying `streams` parallel streams. Unclamped.
inline double mos_single_vcpu(double streams) noexcept {
    return kBaseMos - kQuadCoeff * streams * streams;
}

/// Largest stream count n with mos_single_vcpu(n) >= q_min.
inline std::int64_t max_streams_for_qoe(double q_min) {
    if (!(q_min >= 1.0) || !(q_min < kBaseMos)) throw InvalidQoeTarget(q_min);
    auto n = static_cast<std::int64_t>(std::floor(std::sqrt((kBaseMos - q_min) / kQuadCoeff)));
    // floor(sqrt) can be off by one near exact boundaries
    while (n > 0 && mos_single_vcpu(static_cast<double>(n)) < q_min) --n;
    while (mos_single_vcpu(static_cast<double>(n + 1)) >= q_min) ++n;
    return n;
}

/// Flavored MOS for `rho` streams on a `flavor_cpu`-core flavor with
/// normalized cost `eta`. Raw value; may exceed 5 when sigma*eta > 0.
inline double mos_flavored(double rho, double flavor_cpu, double eta, double sigma) noexcept {
    const double per_cpu = rho / flavor_cpu;
    return kBaseMos - kQuadCoeff * per_cpu * per_cpu + kBaseMos * sigma * eta;
}

/// Stream cap keeping the quadratic term of the flavored model non-negative.
inline std::int64_t rho_max(int flavor_cpu) noexcept {
    auto n = static_cast<std::int64_t>(std::floor(flavor_cpu * std::sqrt(kBaseMos / kQuadCoeff)));
    auto term = [flavor_cpu](std::int64_t r) {
        const double x = static_cast<double>(r) / flavor_cpu;
        return kBaseMos - kQuadCoeff * x * x;
    };
    while (n > 0 && term(n) < 0.0) --n;
    while (term(n + 1) >= 0.0) ++n;
    return n;
}

/// Per-user MOS surrogate driven by stall statistics, clamped to [1,5].
inline double mos_from_playout(const PlayoutReport& report, const QoeModelParams& params) noexcept {
    const double raw = kBaseMos - params.playout_alpha * report.stall_count_per_min -
                       params.playout_beta * report.stall_time_ratio;
    return clamp_mos(raw);
}

} // namespace cdnslice
