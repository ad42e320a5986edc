#pragma once

#include <limits>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "domain.hpp"

namespace dispatchsim {

// Scheduler-facing fold of all delivered events. Per-job, per-channel
// staleness marks ((true_time, seq) of the last applied change) keep the
// fold consistent when independent lags deliver events out of true order:
// a delivery older than what is already applied is ignored for that channel.
class ExecutionCache {
public:
    struct Mark {
        SimTime t = -std::numeric_limits<SimTime>::infinity();
        SeqNo seq = -1;

        bool before(SimTime ot, SeqNo oseq) const { return t < ot || (t == ot && seq < oseq); }
    };

    struct Entry {
        bool arrived = false;
        bool completed = false;
        bool transactional_ready = true;
        bool physical_ready = true;
        SimTime as_of = 0.0;
        Mark trans_mark;
        Mark phys_mark;
    };

    explicit ExecutionCache(const std::vector<Job>* catalog) : catalog_(catalog) {}

    // Applies one delivered event. Deliveries must arrive in (visible_time,
    // seq) order; a regression is a calendar bug.
    void ingest(const Event& e) {
        if (e.visible_time < watermark_time_ ||
            (e.visible_time == watermark_time_ && e.seq <= watermark_seq_ && applied_any_))
            throw std::logic_error("execution cache: watermark regression");
        watermark_time_ = e.visible_time;
        watermark_seq_ = e.seq;
        applied_any_ = true;

        Entry& entry = entries_[e.job_id];
        switch (e.kind) {
            case EventKind::Arrival:
                entry.arrived = true;
                propose(entry.trans_mark, entry.transactional_ready, true, e, entry);
                propose(entry.phys_mark, entry.physical_ready, true, e, entry);
                break;
            case EventKind::BlockStart:
                propose(entry.trans_mark, entry.transactional_ready, false, e, entry);
                break;
            case EventKind::BlockEnd:
                propose(entry.trans_mark, entry.transactional_ready, true, e, entry);
                break;
            case EventKind::FaultStart:
                propose(entry.phys_mark, entry.physical_ready, false, e, entry);
                break;
            case EventKind::FaultEnd:
                propose(entry.phys_mark, entry.physical_ready, true, e, entry);
                break;
            case EventKind::Completion:
                entry.completed = true;
                if (e.true_time > entry.as_of) entry.as_of = e.true_time;
                break;
        }
    }

    // Deep immutable copy of the current fold. `dispatched` is the layer's
    // own zero-lag record of jobs it has started.
    std::shared_ptr<const Snapshot> latch(SimTime latch_time, int resource, std::int64_t epoch,
                                          const std::set<JobId>& dispatched) const {
        auto snap = std::make_shared<Snapshot>();
        snap->epoch = epoch;
        snap->latch_time = latch_time;
        snap->resource = resource;
        for (const auto& [id, entry] : entries_) {
            JobView v;
            v.arrived = entry.arrived;
            v.completed = entry.completed;
            v.dispatched = dispatched.contains(id);
            v.readiness = ReadinessState{entry.transactional_ready, entry.physical_ready, entry.as_of};
            if (entry.arrived) v.job = catalog_->at(static_cast<std::size_t>(id));
            else v.job.id = id;
            snap->job_views.emplace(id, std::move(v));
        }
        return snap;
    }

    const std::map<JobId, Entry>& entries() const { return entries_; }
    std::pair<SimTime, SeqNo> watermark() const { return {watermark_time_, watermark_seq_}; }

private:
    // Applies a readiness change unless a newer change is already folded in.
    void propose(Mark& mark, bool& flag, bool value, const Event& e, Entry& entry) {
        if (!mark.before(e.true_time, e.seq)) return;
        mark = Mark{e.true_time, e.seq};
        flag = value;
        if (e.true_time > entry.as_of) entry.as_of = e.true_time;
    }

    const std::vector<Job>* catalog_;
    std::map<JobId, Entry> entries_;
    SimTime watermark_time_ = -std::numeric_limits<SimTime>::infinity();
    SeqNo watermark_seq_ = -1;
    bool applied_any_ = false;
};

// Candidate set under a snapshot: arrived, not completed or dispatched, and
// observed ready on both channels. Ordered by job id.
inline std::vector<JobId> compute_candidates(const Snapshot& s) {
    std::vector<JobId> out;
    for (const auto& [id, v] : s.job_views) {
        if (!v.arrived || v.completed || v.dispatched) continue;
        if (v.readiness.transactional_ready && v.readiness.physical_ready) out.push_back(id);
    }
    return out;
}

// A latched decision awaiting its commit. generation invalidates stale
// commit-due entries after an abort re-latches the epoch.
struct PendingDecision {
    std::int64_t epoch = 0;
    std::int64_t generation = 0;
    DecisionRequest request;
    JobId intent = -1;
    SimTime latch_time = 0.0;
    SimTime commit_due = 0.0;
    int retries = 0;
};

enum class InvalidationVerdict { Keep, Abort };

// Critical-event scope: only deliveries that remove the chosen intent from
// admissibility abort the pending decision. Events on other candidates keep
// the decision alive.
inline InvalidationVerdict check_invalidation(const PendingDecision& pending, const Event& e) {
    if (e.job_id != pending.intent) return InvalidationVerdict::Keep;
    switch (e.kind) {
        case EventKind::BlockStart:
        case EventKind::FaultStart:
        case EventKind::Completion:
            return InvalidationVerdict::Abort;
        default:
            return InvalidationVerdict::Keep;
    }
}

} // namespace dispatchsim
