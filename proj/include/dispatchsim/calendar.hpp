#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <variant>
#include <vector>

#include "domain.hpp"

namespace dispatchsim {

// Payloads carried by calendar entries besides event deliveries.

struct MachineReadyPayload {
    enum class Cause { Completion, HoldReleased };
    Cause cause = Cause::Completion;
    JobId job = -1;  // completing job, -1 for failure-handling holds
};

// Opens a decision epoch once every same-time delivery has been ingested.
// relatch carries an epoch continuation after an invalidation abort.
struct ControlPayload {
    bool relatch = false;
    std::int64_t epoch = -1;
    int retries = 0;
    bool fallback = false;
};

struct CommitDuePayload {
    std::int64_t generation = 0;
};

using CalendarPayload = std::variant<Event, MachineReadyPayload, ControlPayload, CommitDuePayload>;

struct CalendarEntry {
    SimTime time = 0.0;
    int klass = 0;  // pop order at equal time; see below
    SeqNo order = 0;
    CalendarPayload payload;
};

// Deterministic discrete-event queue. Entries pop by (time, klass, order).
// At equal timestamps deliveries always drain before anything that latches
// or commits, so snapshots and commits see every event visible at their
// own timestamp:
//   deliveries(0) < machine-ready(1) < control(2) < commit-due(3).
class EventCalendar {
public:
    static constexpr int kDelivery = 0;
    static constexpr int kMachineReady = 1;
    static constexpr int kControl = 2;
    static constexpr int kCommitDue = 3;

    void push_delivery(const Event& e) {
        // ties between deliveries resolve by event seq, matching fold order
        push_entry({e.visible_time, kDelivery, e.seq, e});
    }

    void push_machine_ready(SimTime t, MachineReadyPayload p) {
        push_entry({t, kMachineReady, next_order_++, p});
    }

    void push_control(SimTime t, ControlPayload p) {
        push_entry({t, kControl, next_order_++, p});
    }

    void push_commit_due(SimTime t, CommitDuePayload p) {
        push_entry({t, kCommitDue, next_order_++, p});
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    SimTime now() const { return now_; }

    CalendarEntry pop() {
        if (heap_.empty()) throw std::logic_error("calendar: pop on empty queue");
        CalendarEntry e = heap_.top();
        heap_.pop();
        if (e.time < now_) throw std::logic_error("calendar: time regression");
        now_ = e.time;
        return e;
    }

private:
    struct Later {
        bool operator()(const CalendarEntry& a, const CalendarEntry& b) const {
            if (a.time != b.time) return a.time > b.time;
            if (a.klass != b.klass) return a.klass > b.klass;
            return a.order > b.order;
        }
    };

    void push_entry(CalendarEntry e) { heap_.push(std::move(e)); }

    std::priority_queue<CalendarEntry, std::vector<CalendarEntry>, Later> heap_;
    SimTime now_ = 0.0;
    SeqNo next_order_ = 1'000'000'000;  // disjoint from event seq space
};

} // namespace dispatchsim
