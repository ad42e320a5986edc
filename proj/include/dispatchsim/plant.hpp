#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "domain.hpp"
#include "rng.hpp"

namespace dispatchsim {

// Half-open ground-truth disturbance interval: the channel is blocked for
// t in [start, end).
struct DisturbanceWindow {
    JobId job_id = 0;
    Channel channel = Channel::Transactional;
    SimTime start = 0.0;
    SimTime end = 0.0;

    bool contains(SimTime t) const { return t >= start && t < end; }

    void validate() const {
        if (!(start < end)) throw std::invalid_argument("disturbance window: start must precede end");
    }
};

// One job with everything drawn at generation time: attributes, disturbance
// windows, override arming, and every observation lag (including the lag of
// the eventual completion event). Pre-drawing keeps the exogenous trace
// identical across architectures and policies under one seed.
struct GeneratedJob {
    Job job;
    std::optional<DisturbanceWindow> transactional_block;
    std::optional<DisturbanceWindow> physical_fault;
    bool override_armed = false;
    double completion_lag = 0.0;
    int block_start_event = -1;  // index into PlantTruth::events, -1 if none
    int fault_start_event = -1;
};

struct PlantTruth {
    std::vector<GeneratedJob> jobs;    // dense ids, arrival order
    std::vector<Job> catalog;          // catalog[id] == jobs[id].job
    std::vector<Event> events;         // generation-time events, sorted by seq
    SeqNo next_seq = 0;                // first seq free for runtime events

    const Event* window_start_event(JobId id, Channel ch) const {
        const auto& gj = jobs.at(static_cast<std::size_t>(id));
        int idx = ch == Channel::Transactional ? gj.block_start_event : gj.fault_start_event;
        return idx >= 0 ? &events[static_cast<std::size_t>(idx)] : nullptr;
    }
};

// ---------------------------------------------------------------------------
// Pure builders, separated from the stream-driven generator so the arithmetic
// is testable with pinned draws.

inline Job make_job(JobId id, SimTime prev_arrival, double interarrival, double processing,
                    double due_factor, int weight) {
    Job j;
    j.id = id;
    j.arrival_time = prev_arrival + interarrival;
    j.processing_time = processing;
    j.due_date = j.arrival_time + processing * due_factor;
    j.weight = static_cast<double>(weight);
    return j;
}

inline DisturbanceWindow make_window(const Job& job, Channel channel, double start_offset,
                                     double duration) {
    DisturbanceWindow w;
    w.job_id = job.id;
    w.channel = channel;
    w.start = job.arrival_time + start_offset;
    w.end = w.start + duration;
    return w;
}

inline Event with_observation(Event e, double lag) {
    e.visible_time = e.true_time + lag;
    return e;
}

// Generates the full exogenous trace for one replication: arrivals until the
// horizon, per-job disturbance windows and override arming, and the lagged
// observation event for every ground-truth change. Event seq is assigned in
// (true_time, job, kind) order.
inline PlantTruth generate_plant(const SimConfig& cfg, const StreamFactory& streams) {
    cfg.validate();
    PlantTruth truth;

    Substream arrivals = streams.stream("arrivals");
    Substream processing = streams.stream("processing");
    Substream duedates = streams.stream("duedates");
    Substream weights = streams.stream("weights");
    Substream disturbances = streams.stream("disturbances");
    Substream overrides = streams.stream("overrides");
    Substream lags = streams.stream("lags");

    auto draw = [](Substream& s, const UniformBounds& b) { return s.uniform(b.low, b.high); };

    struct Raw {
        Event event;
        int owner;  // index into truth.jobs
        int slot;   // kind rank for deterministic ties within one job
    };
    std::vector<Raw> raw;

    SimTime prev_arrival = 0.0;
    for (JobId id = 0;; ++id) {
        const double inter = draw(arrivals, cfg.interarrival);
        if (prev_arrival + inter > cfg.horizon) break;  // not generated past the horizon

        GeneratedJob gj;
        gj.job = make_job(id, prev_arrival, inter, draw(processing, cfg.processing),
                          draw(duedates, cfg.due_factor),
                          weights.uniform_int(cfg.weight_min, cfg.weight_max));
        prev_arrival = gj.job.arrival_time;

        if (disturbances.bernoulli(cfg.p_sys)) {
            gj.transactional_block =
                make_window(gj.job, Channel::Transactional, draw(disturbances, cfg.window_start_offset),
                            draw(disturbances, cfg.window_duration));
        }
        if (disturbances.bernoulli(cfg.p_phys)) {
            gj.physical_fault =
                make_window(gj.job, Channel::Physical, draw(disturbances, cfg.window_start_offset),
                            draw(disturbances, cfg.window_duration));
        }
        gj.override_armed = overrides.bernoulli(cfg.p_hum);

        const int owner = static_cast<int>(truth.jobs.size());
        auto emit = [&](Channel ch, EventKind kind, SimTime t, int slot) {
            Event e;
            e.channel = ch;
            e.job_id = id;
            e.kind = kind;
            e.true_time = t;
            raw.push_back({with_observation(e, draw(lags, cfg.lag)), owner, slot});
        };

        emit(Channel::Transactional, EventKind::Arrival, gj.job.arrival_time, 0);
        if (gj.transactional_block) {
            emit(Channel::Transactional, EventKind::BlockStart, gj.transactional_block->start, 1);
            emit(Channel::Transactional, EventKind::BlockEnd, gj.transactional_block->end, 2);
        }
        if (gj.physical_fault) {
            emit(Channel::Physical, EventKind::FaultStart, gj.physical_fault->start, 3);
            emit(Channel::Physical, EventKind::FaultEnd, gj.physical_fault->end, 4);
        }
        gj.completion_lag = draw(lags, cfg.lag);

        truth.jobs.push_back(std::move(gj));
    }

    std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
        if (a.event.true_time != b.event.true_time) return a.event.true_time < b.event.true_time;
        if (a.event.job_id != b.event.job_id) return a.event.job_id < b.event.job_id;
        return a.slot < b.slot;
    });

    truth.events.reserve(raw.size());
    for (auto& r : raw) {
        r.event.seq = truth.next_seq++;
        if (r.event.kind == EventKind::BlockStart)
            truth.jobs[static_cast<std::size_t>(r.owner)].block_start_event =
                static_cast<int>(truth.events.size());
        if (r.event.kind == EventKind::FaultStart)
            truth.jobs[static_cast<std::size_t>(r.owner)].fault_start_event =
                static_cast<int>(truth.events.size());
        truth.events.push_back(r.event);
    }

    truth.catalog.reserve(truth.jobs.size());
    for (const auto& gj : truth.jobs) truth.catalog.push_back(gj.job);
    return truth;
}

// ---------------------------------------------------------------------------
// Ground-truth plant state: the single non-preemptive machine, true
// admissibility, and commit adjudication.

struct Adjudication {
    SysOutcome sys = SysOutcome::Accepted;
    PhysOutcome phys = PhysOutcome::Started;
    HumanAction human;
    bool phys_blocked = false;           // physical window truly active at commit
    std::optional<JobId> started;        // job occupying the machine, if any
    std::optional<SimTime> completes_at;
    double hold = 0.0;                   // failure-handling hold on the machine
};

struct ServiceInterval {
    JobId job = 0;
    SimTime start = 0.0;
    SimTime end = 0.0;
};

class Plant {
public:
    Plant(const PlantTruth* truth, double rejection_delay, double fault_delay)
        : truth_(truth),
          rejection_delay_(rejection_delay),
          fault_delay_(fault_delay),
          completion_times_(truth->jobs.size()),
          armed_(truth->jobs.size()) {
        for (std::size_t i = 0; i < truth->jobs.size(); ++i) armed_[i] = truth->jobs[i].override_armed;
    }

    const PlantTruth& truth() const { return *truth_; }

    bool is_idle(SimTime t) const { return !in_service_ && t >= busy_until_; }
    std::optional<JobId> in_service() const { return in_service_; }

    // True (not observed) channel admissibility of a job at time t.
    std::pair<bool, bool> true_admissible(JobId id, SimTime t) const {
        const auto& gj = job_at(id);
        const bool trans = !(gj.transactional_block && gj.transactional_block->contains(t));
        const bool phys = !(gj.physical_fault && gj.physical_fault->contains(t));
        return {trans, phys};
    }

    // Resolves one committed intent against ground truth at t. Order of
    // checks: transactional rejection, then human override, then physical
    // fault, then start. A redirect override starts the earliest-due truly
    // admissible other candidate; overrides fire at most once per job.
    Adjudication adjudicate_commit(JobId intent, SimTime t, std::span<const JobId> candidates) {
        if (!is_idle(t)) throw std::logic_error("adjudicate_commit: machine busy (pipeline bug)");

        Adjudication out;
        const auto [trans_ok, phys_ok] = true_admissible(intent, t);
        out.phys_blocked = !phys_ok;

        if (!trans_ok) {
            out.sys = SysOutcome::Rejected;
            out.phys = PhysOutcome::NotAttempted;
            out.hold = rejection_delay_;  // rollback / re-planning hold, no service
            busy_until_ = t + rejection_delay_;
            return out;
        }
        out.sys = SysOutcome::Accepted;

        if (armed_[static_cast<std::size_t>(intent)]) {
            armed_[static_cast<std::size_t>(intent)] = false;
            out.phys = PhysOutcome::NotAttempted;
            if (auto target = pick_redirect(intent, t, candidates)) {
                out.human = HumanAction::redirect(*target);
                start_job(*target, t, out);
            } else {
                out.human = HumanAction::cancel();
            }
            return out;
        }

        if (!phys_ok) {
            out.phys = PhysOutcome::Fault;
            out.hold = fault_delay_;  // fault-handling hold, no service
            busy_until_ = t + fault_delay_;
            return out;
        }

        out.phys = PhysOutcome::Started;
        start_job(intent, t, out);
        return out;
    }

    // Completes the in-service job at time t and frees the machine.
    JobId complete_current(SimTime t) {
        if (!in_service_) throw std::logic_error("complete_current: machine not in service");
        const JobId id = *in_service_;
        completion_times_[static_cast<std::size_t>(id)] = t;
        service_log_.back().end = t;
        in_service_.reset();
        return id;
    }

    bool completed(JobId id) const { return completion_times_[static_cast<std::size_t>(id)].has_value(); }
    std::optional<SimTime> completion_time(JobId id) const {
        return completion_times_[static_cast<std::size_t>(id)];
    }
    const std::vector<ServiceInterval>& service_log() const { return service_log_; }

private:
    const GeneratedJob& job_at(JobId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= truth_->jobs.size())
            throw std::invalid_argument("unknown job id " + std::to_string(id));
        return truth_->jobs[static_cast<std::size_t>(id)];
    }

    std::optional<JobId> pick_redirect(JobId intent, SimTime t, std::span<const JobId> candidates) const {
        std::optional<JobId> best;
        for (JobId id : candidates) {
            if (id == intent) continue;
            if (completed(id) || in_service_ == id) continue;
            const auto [trans_ok, phys_ok] = true_admissible(id, t);
            if (!trans_ok || !phys_ok) continue;
            if (!best) {
                best = id;
                continue;
            }
            const Job& a = job_at(id).job;
            const Job& b = job_at(*best).job;
            if (a.due_date < b.due_date || (a.due_date == b.due_date && id < *best)) best = id;
        }
        return best;
    }

    void start_job(JobId id, SimTime t, Adjudication& out) {
        in_service_ = id;
        const SimTime done = t + job_at(id).job.processing_time;
        busy_until_ = done;
        service_log_.push_back({id, t, done});
        out.started = id;
        out.completes_at = done;
    }

    const PlantTruth* truth_;
    double rejection_delay_;
    double fault_delay_;
    std::vector<std::optional<SimTime>> completion_times_;
    std::vector<bool> armed_;
    std::optional<JobId> in_service_;
    SimTime busy_until_ = -std::numeric_limits<SimTime>::infinity();
    std::vector<ServiceInterval> service_log_;
};

} // namespace dispatchsim
