#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "domain.hpp"

namespace dispatchsim {

using SelectFn = std::function<JobId(const DecisionRequest&)>;

// A dispatch policy is a pure function of the decision request; the returned
// job must be one of the request's candidates.
struct Policy {
    std::string name;
    SelectFn select;
};

namespace detail {

template <typename Key>
JobId select_min_by(const DecisionRequest& request, Key key) {
    if (request.candidates.empty())
        throw std::invalid_argument("policy invoked with empty candidate set");
    const auto& views = request.snapshot->job_views;
    JobId best = request.candidates.front();
    double best_key = key(views.at(best).job);
    for (std::size_t i = 1; i < request.candidates.size(); ++i) {
        const JobId id = request.candidates[i];
        const double k = key(views.at(id).job);
        // candidates are ordered by id, so strict < keeps the lowest id on ties
        if (k < best_key) {
            best = id;
            best_key = k;
        }
    }
    return best;
}

} // namespace detail

inline JobId select_edd(const DecisionRequest& request) {
    return detail::select_min_by(request, [](const Job& j) { return j.due_date; });
}

inline JobId select_spt(const DecisionRequest& request) {
    return detail::select_min_by(request, [](const Job& j) { return j.processing_time; });
}

// First-admissible heuristic used when re-isolation retries are exhausted.
inline JobId select_fallback(const DecisionRequest& request) {
    if (request.candidates.empty())
        throw std::invalid_argument("policy invoked with empty candidate set");
    return request.candidates.front();
}

inline Policy make_policy(const std::string& name) {
    if (name == "edd") return {"edd", select_edd};
    if (name == "spt") return {"spt", select_spt};
    throw std::invalid_argument("unknown policy: " + name + " (expected edd or spt)");
}

} // namespace dispatchsim
