#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dispatchsim {

using SimTime = double;
using JobId = std::int64_t;
using SeqNo = std::int64_t;

// ---------------------------------------------------------------------------
// Jobs and readiness

struct Job {
    JobId id = 0;
    SimTime arrival_time = 0.0;
    SimTime processing_time = 0.0;
    SimTime due_date = 0.0;
    double weight = 0.0;
    std::optional<SimTime> completion_time;

    void validate() const {
        if (processing_time <= 0.0) throw std::invalid_argument("job: processing_time must be > 0");
        if (weight <= 0.0) throw std::invalid_argument("job: weight must be > 0");
        if (due_date < arrival_time) throw std::invalid_argument("job: due_date must be >= arrival_time");
        if (completion_time && *completion_time < arrival_time + processing_time)
            throw std::invalid_argument("job: completion_time earlier than arrival + processing");
    }

    bool operator==(const Job&) const = default;
};

// Scheduler-observed readiness of one job. as_of is the latest ground-truth
// timestamp folded into this record; it never decreases.
struct ReadinessState {
    bool transactional_ready = true;
    bool physical_ready = true;
    SimTime as_of = 0.0;

    bool operator==(const ReadinessState&) const = default;
};

// ---------------------------------------------------------------------------
// Events

enum class Channel { Physical, Transactional, Human };

enum class EventKind { Arrival, BlockStart, BlockEnd, FaultStart, FaultEnd, Completion };

// One state-change message. true_time is when the plant state changed,
// visible_time is when the scheduler can observe it; visible_time - true_time
// is the sampled observation lag (always >= 0). seq totally orders events
// with equal timestamps.
struct Event {
    SeqNo seq = 0;
    Channel channel = Channel::Transactional;
    JobId job_id = 0;
    EventKind kind = EventKind::Arrival;
    SimTime true_time = 0.0;
    SimTime visible_time = 0.0;

    double lag() const { return visible_time - true_time; }

    bool operator==(const Event&) const = default;
};

inline const char* to_string(Channel c) {
    switch (c) {
        case Channel::Physical: return "physical";
        case Channel::Transactional: return "transactional";
        case Channel::Human: return "human";
    }
    return "?";
}

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::Arrival: return "arrival";
        case EventKind::BlockStart: return "block_start";
        case EventKind::BlockEnd: return "block_end";
        case EventKind::FaultStart: return "fault_start";
        case EventKind::FaultEnd: return "fault_end";
        case EventKind::Completion: return "completion";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Snapshots and decision requests

// One job as it appears inside a snapshot: static attributes plus the
// observed readiness fold. `arrived` is false while only window events for
// the job have been delivered; such jobs are never candidates.
struct JobView {
    Job job;
    ReadinessState readiness;
    bool arrived = false;
    bool completed = false;
    bool dispatched = false;

    bool operator==(const JobView&) const = default;
};

// Immutable scheduler-facing state latched at a decision epoch. Holds the
// fold of every event with visible_time <= latch_time, applied in
// (visible_time, seq) order. Never mutated after construction; handed out
// through shared_ptr<const Snapshot>.
struct Snapshot {
    std::int64_t epoch = 0;
    SimTime latch_time = 0.0;
    int resource = 0;
    std::map<JobId, JobView> job_views;

    bool operator==(const Snapshot&) const = default;
};

// The contract handed to a policy: snapshot, idle resource, and the ordered
// candidate set (observed transactionally and physically ready, arrived,
// not yet dispatched).
struct DecisionRequest {
    std::shared_ptr<const Snapshot> snapshot;
    int resource = 0;
    std::vector<JobId> candidates;
};

// ---------------------------------------------------------------------------
// Divergence records

enum class SysOutcome { Accepted, Rejected };
enum class PhysOutcome { Started, Fault, NotAttempted };
enum class Visibility { NotApplicable, Visible, Hidden };
enum class Architecture { Direct, Layer };

struct HumanAction {
    enum class Kind { None, Redirect, Cancel };

    Kind kind = Kind::None;
    JobId redirect_to = -1;

    static HumanAction none() { return {}; }
    static HumanAction cancel() { return {Kind::Cancel, -1}; }
    static HumanAction redirect(JobId target) { return {Kind::Redirect, target}; }

    bool intervened() const { return kind != Kind::None; }

    bool operator==(const HumanAction&) const = default;
};

// Typed outcome of one committed dispatch intent. phys_blocked_at_commit is
// the ground-truth physical-window state at commit time; it is what lets a
// transactional rejection that coincided with an active fault window be told
// apart from a plain rejection.
struct DivergenceRecord {
    std::int64_t epoch = 0;
    JobId intent = 0;
    SysOutcome sys = SysOutcome::Accepted;
    PhysOutcome phys = PhysOutcome::Started;
    HumanAction human;
    Visibility visibility = Visibility::NotApplicable;
    SimTime commit_time = 0.0;
    Architecture arch = Architecture::Layer;
    bool phys_blocked_at_commit = false;
    bool fallback = false;
    int retries = 0;

    bool operator==(const DivergenceRecord&) const = default;
};

enum class OutcomeCategory { Clean, Transactional, Physical, Combined, HumanOverride };

// Total classification of a record into exactly one category.
// Precedence: human intervention > transactional > physical.
inline OutcomeCategory classify_outcome(const DivergenceRecord& r) noexcept {
    if (r.human.intervened()) return OutcomeCategory::HumanOverride;
    if (r.sys == SysOutcome::Rejected)
        return r.phys_blocked_at_commit ? OutcomeCategory::Combined : OutcomeCategory::Transactional;
    if (r.phys == PhysOutcome::Fault) return OutcomeCategory::Physical;
    return OutcomeCategory::Clean;
}

inline bool is_disturbed(const DivergenceRecord& r) noexcept {
    return classify_outcome(r) != OutcomeCategory::Clean;
}

// A physical attempt is skipped exactly when the transaction was rejected or
// a human intervened before the start.
inline bool record_consistent(const DivergenceRecord& r) noexcept {
    const bool no_attempt_expected = r.sys == SysOutcome::Rejected || r.human.intervened();
    if ((r.phys == PhysOutcome::NotAttempted) != no_attempt_expected) return false;
    const bool clean = classify_outcome(r) == OutcomeCategory::Clean;
    return (r.visibility == Visibility::NotApplicable) == clean;
}

// Visible divergence: the blocking condition was already observable when the
// action was committed. Only defined for disturbed records.
inline Visibility classify_visibility(const DivergenceRecord& record, const Event& blocking_event) {
    if (classify_outcome(record) == OutcomeCategory::Clean)
        throw std::invalid_argument("classify_visibility: record is not disturbed");
    return blocking_event.visible_time <= record.commit_time ? Visibility::Visible
                                                             : Visibility::Hidden;
}

// ---------------------------------------------------------------------------
// Serialization

inline const char* to_string(SysOutcome s) {
    return s == SysOutcome::Accepted ? "accepted" : "rejected";
}

inline const char* to_string(PhysOutcome p) {
    switch (p) {
        case PhysOutcome::Started: return "started";
        case PhysOutcome::Fault: return "fault";
        case PhysOutcome::NotAttempted: return "not_attempted";
    }
    return "?";
}

inline const char* to_string(Visibility v) {
    switch (v) {
        case Visibility::NotApplicable: return "not_applicable";
        case Visibility::Visible: return "visible";
        case Visibility::Hidden: return "hidden";
    }
    return "?";
}

inline const char* to_string(Architecture a) {
    return a == Architecture::Direct ? "direct" : "layer";
}

inline const char* to_string(OutcomeCategory c) {
    switch (c) {
        case OutcomeCategory::Clean: return "clean";
        case OutcomeCategory::Transactional: return "transactional";
        case OutcomeCategory::Physical: return "physical";
        case OutcomeCategory::Combined: return "combined";
        case OutcomeCategory::HumanOverride: return "human_override";
    }
    return "?";
}

inline std::string to_string(const HumanAction& h) {
    switch (h.kind) {
        case HumanAction::Kind::None: return "none";
        case HumanAction::Kind::Cancel: return "cancel";
        case HumanAction::Kind::Redirect: return "redirect:" + std::to_string(h.redirect_to);
    }
    return "?";
}

// One line-delimited log record per dispatch, fixed field set and order.
inline std::string divergence_to_json_line(const DivergenceRecord& r,
                                           const std::string& policy,
                                           std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["intent"] = r.intent;
    j["sys"] = to_string(r.sys);
    j["phys"] = to_string(r.phys);
    j["human"] = to_string(r.human);
    j["visibility"] = to_string(r.visibility);
    j["commit_time"] = r.commit_time;
    j["arch"] = to_string(r.arch);
    j["policy"] = policy;
    j["seed"] = seed;
    return j.dump();
}

inline std::string trace_to_json_line(const Event& e) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["channel"] = to_string(e.channel);
    j["kind"] = to_string(e.kind);
    j["job"] = e.job_id;
    j["true_time"] = e.true_time;
    j["visible_time"] = e.visible_time;
    return j.dump();
}

// Canonical byte representation of a snapshot, used to check immutability.
inline std::string snapshot_to_json(const Snapshot& s) {
    nlohmann::ordered_json j;
    j["epoch"] = s.epoch;
    j["latch_time"] = s.latch_time;
    j["resource"] = s.resource;
    auto views = nlohmann::ordered_json::object();
    for (const auto& [id, v] : s.job_views) {
        nlohmann::ordered_json jv;
        jv["arrived"] = v.arrived;
        jv["completed"] = v.completed;
        jv["dispatched"] = v.dispatched;
        jv["transactional_ready"] = v.readiness.transactional_ready;
        jv["physical_ready"] = v.readiness.physical_ready;
        jv["as_of"] = v.readiness.as_of;
        if (v.arrived) {
            jv["arrival_time"] = v.job.arrival_time;
            jv["processing_time"] = v.job.processing_time;
            jv["due_date"] = v.job.due_date;
            jv["weight"] = v.job.weight;
        }
        views[std::to_string(id)] = std::move(jv);
    }
    j["job_views"] = std::move(views);
    return j.dump();
}

} // namespace dispatchsim
