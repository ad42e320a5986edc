#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace dispatchsim {

struct UniformBounds {
    double low = 0.0;
    double high = 0.0;

    void validate(const char* what) const {
        if (!(low <= high))
            throw std::invalid_argument(std::string(what) + ": bounds must satisfy low <= high");
    }

    bool operator==(const UniformBounds&) const = default;
};

inline constexpr UniformBounds kLagLow{0.0, 0.3};
inline constexpr UniformBounds kLagMedium{0.1, 1.5};
inline constexpr UniformBounds kLagHigh{0.5, 3.0};

inline UniformBounds lag_bounds_for(const std::string& preset) {
    if (preset == "low") return kLagLow;
    if (preset == "medium") return kLagMedium;
    if (preset == "high") return kLagHigh;
    throw std::invalid_argument("unknown lag preset: " + preset);
}

inline std::optional<std::string> lag_preset_name(const UniformBounds& b) {
    if (b == kLagLow) return "low";
    if (b == kLagMedium) return "medium";
    if (b == kLagHigh) return "high";
    return std::nullopt;
}

// Full parameterization of one replication. Defaults are the evaluation
// configuration; scenario files and CLI flags override individual fields.
struct SimConfig {
    UniformBounds processing{3.0, 8.0};
    UniformBounds interarrival{5.5, 10.5};
    UniformBounds due_factor{1.5, 3.0};      // due = arrival + processing * factor
    int weight_min = 1;
    int weight_max = 5;

    double p_sys = 0.14;
    double p_phys = 0.10;
    double p_hum = 0.07;
    UniformBounds window_start_offset{0.0, 10.0};  // window start = arrival + offset
    UniformBounds window_duration{2.0, 6.0};

    UniformBounds lag = kLagMedium;
    double decision_window = 0.85;
    double rejection_delay = 2.0;  // machine hold after a transactional rejection at commit
    double fault_delay = 3.0;      // machine hold after a physical fault at commit
    int max_reisolations = 5;      // re-latches per epoch before the fallback dispatch

    double horizon = 2000.0;
    double warmup_fraction = 0.05;
    std::uint64_t seed = 0;

    double warmup_cutoff() const { return warmup_fraction * horizon; }

    void validate() const {
        processing.validate("processing");
        interarrival.validate("interarrival");
        due_factor.validate("due_factor");
        window_start_offset.validate("window_start_offset");
        window_duration.validate("window_duration");
        lag.validate("lag");
        auto prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument(std::string(what) + ": probability outside [0,1]");
        };
        prob(p_sys, "p_sys");
        prob(p_phys, "p_phys");
        prob(p_hum, "p_hum");
        if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
            throw std::invalid_argument("warmup_fraction outside [0,1)");
        if (!(decision_window > 0.0)) throw std::invalid_argument("decision_window must be > 0");
        if (rejection_delay < 0.0) throw std::invalid_argument("rejection_delay must be >= 0");
        if (fault_delay < 0.0) throw std::invalid_argument("fault_delay must be >= 0");
        if (max_reisolations < 0) throw std::invalid_argument("max_reisolations must be >= 0");
        if (weight_min < 1 || weight_max < weight_min)
            throw std::invalid_argument("weights must satisfy 1 <= weight_min <= weight_max");
        if (!(lag.low >= 0.0)) throw std::invalid_argument("lag bounds must be non-negative");
        if (processing.low <= 0.0) throw std::invalid_argument("processing times must be > 0");
        if (interarrival.low < 0.0) throw std::invalid_argument("interarrival times must be >= 0");
    }
};

} // namespace dispatchsim
