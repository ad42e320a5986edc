#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "domain.hpp"
#include "plant.hpp"

namespace dispatchsim {

// Everything one replication produces. All measures below are computed from
// this snapshot of the run; warm-up exclusion applies to records by commit
// time and to jobs by completion time.
struct RunResult {
    std::uint64_t seed = 0;
    std::string lag_label;
    UniformBounds lag_bounds;
    Architecture arch = Architecture::Layer;
    std::string policy;
    double horizon = 0.0;
    double warmup_cutoff = 0.0;

    std::vector<DivergenceRecord> records;
    std::vector<Job> completed_jobs;  // completion_time set, includes post-horizon finish
    std::vector<Event> trace;         // full event trace when requested, else empty
    std::vector<ServiceInterval> service_log;

    std::int64_t generated_jobs = 0;
    std::int64_t completed_by_horizon = 0;
    std::int64_t in_service_at_horizon = 0;
    std::int64_t waiting_at_horizon = 0;

    std::int64_t epochs_opened = 0;
    std::int64_t fallback_commits = 0;
    int max_retries_seen = 0;
};

inline bool after_warmup(const RunResult& r, const DivergenceRecord& rec) {
    return rec.commit_time > r.warmup_cutoff;
}

// Mean weighted tardiness over jobs completed after warm-up:
//   (1/N) * sum_i w_i * max(0, C_i - d_i)
struct Tardiness {
    double mean_weighted = 0.0;
    std::int64_t jobs_counted = 0;
};

inline Tardiness weighted_tardiness(const RunResult& r) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (const Job& j : r.completed_jobs) {
        if (!j.completion_time || *j.completion_time <= r.warmup_cutoff) continue;
        sum += j.weight * std::max(0.0, *j.completion_time - j.due_date);
        ++n;
    }
    if (n == 0) return {0.0, 0};  // empty N flagged via jobs_counted
    return {sum / static_cast<double>(n), n};
}

// Jobs completed after warm-up per effective time unit.
inline double throughput(const RunResult& r) {
    std::int64_t n = 0;
    for (const Job& j : r.completed_jobs)
        if (j.completion_time && *j.completion_time > r.warmup_cutoff) ++n;
    const double span = r.horizon - r.warmup_cutoff;
    return span > 0.0 ? static_cast<double>(n) / span : 0.0;
}

// Committed intents that could not execute as intended.
inline std::int64_t count_invalid(const RunResult& r) {
    std::int64_t n = 0;
    for (const auto& rec : r.records)
        if (after_warmup(r, rec) && is_disturbed(rec)) ++n;
    return n;
}

inline std::int64_t count_visible(const RunResult& r) {
    std::int64_t n = 0;
    for (const auto& rec : r.records)
        if (after_warmup(r, rec) && rec.visibility == Visibility::Visible) ++n;
    return n;
}

// Fraction of disturbed outcomes carrying a typed causal category. The layer
// types every outcome; the direct baseline collapses failures into a generic
// flag, so its learner-visible coverage is zero. Vacuously 1 with no
// disturbed outcomes.
inline double attribution_coverage(const RunResult& r) {
    std::int64_t disturbed = 0;
    for (const auto& rec : r.records)
        if (after_warmup(r, rec) && is_disturbed(rec)) ++disturbed;
    if (disturbed == 0) return 1.0;
    return r.arch == Architecture::Layer ? 1.0 : 0.0;
}

// Partition of disturbed dispatches by outcome type.
inline std::map<OutcomeCategory, std::int64_t> composition_by_type(const RunResult& r) {
    std::map<OutcomeCategory, std::int64_t> counts;
    for (const auto& rec : r.records) {
        if (!after_warmup(r, rec)) continue;
        const OutcomeCategory cat = classify_outcome(rec);
        if (cat != OutcomeCategory::Clean) ++counts[cat];
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Cross-replication aggregation

struct AggregateSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double half_width_95 = 0.0;  // 1.96 * s / sqrt(n), normal approximation
};

inline AggregateSummary aggregate(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("aggregate requires n >= 2");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double var = ss / (n - 1.0);
    return {values.size(), mean, 1.96 * std::sqrt(var / n)};
}

} // namespace dispatchsim
