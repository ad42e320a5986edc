#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <utility>

#include "calendar.hpp"
#include "config.hpp"
#include "domain.hpp"
#include "exec_layer.hpp"
#include "metrics.hpp"
#include "plant.hpp"
#include "policies.hpp"

namespace dispatchsim {

struct SimOptions {
    bool record_trace = false;
};

// Test hooks; both optional.
struct SimObserver {
    std::function<void(const Snapshot&)> on_latch;
    std::function<void(const DivergenceRecord&)> on_record;
};

// One replication: a deterministic event-serial loop over deliveries,
// machine transitions, epoch openings, and commits.
//
// Layer mode latches an immutable snapshot per epoch, monitors deliveries
// for events that invalidate the chosen intent, aborts and re-latches on
// such events (bounded, then falls back to first-admissible immediate
// commit), and records typed divergence. Direct mode dispatches from the
// same observable cache but commits blind; its ground-truth outcomes are
// still recorded for scoring.
class Simulation {
public:
    Simulation(SimConfig cfg, Architecture arch, Policy policy, SimOptions options = {},
               SimObserver observer = {})
        : cfg_(std::move(cfg)),
          arch_(arch),
          policy_(std::move(policy)),
          options_(options),
          observer_(std::move(observer)) {
        cfg_.validate();
    }

    RunResult run() { return run(generate_plant(cfg_, StreamFactory(cfg_.seed))); }

    // Runs on a prepared exogenous trace instead of drawing one from the
    // config seed.
    RunResult run(PlantTruth truth) {
        truth_ = std::move(truth);
        plant_.emplace(&truth_, cfg_.rejection_delay, cfg_.fault_delay);
        cache_.emplace(&truth_.catalog);
        for (const Event& e : truth_.events) calendar_.push_delivery(e);
        if (options_.record_trace) trace_ = truth_.events;

        while (!calendar_.empty()) {
            const CalendarEntry entry = calendar_.pop();
            if (const auto* e = std::get_if<Event>(&entry.payload)) {
                handle_delivery(entry.time, *e);
            } else if (const auto* m = std::get_if<MachineReadyPayload>(&entry.payload)) {
                handle_machine_ready(entry.time, *m);
            } else if (const auto* c = std::get_if<ControlPayload>(&entry.payload)) {
                handle_control(entry.time, *c);
            } else {
                handle_commit_due(entry.time, std::get<CommitDuePayload>(entry.payload));
            }
        }
        return finalize();
    }

private:
    void handle_delivery(SimTime t, const Event& e) {
        cache_->ingest(e);
        if (pending_) {
            if (arch_ == Architecture::Layer &&
                check_invalidation(*pending_, e) == InvalidationVerdict::Abort) {
                // discard the snapshot; re-isolate once same-time deliveries drain
                const int done = pending_->retries;
                ControlPayload c;
                c.relatch = true;
                c.epoch = pending_->epoch;
                if (done < cfg_.max_reisolations) {
                    c.retries = done + 1;
                } else {
                    c.retries = done;
                    c.fallback = true;
                }
                pending_.reset();
                calendar_.push_control(t, c);
            }
            return;
        }
        if (plant_->is_idle(t) && t < cfg_.horizon) calendar_.push_control(t, {});
    }

    void handle_machine_ready(SimTime t, const MachineReadyPayload& m) {
        if (m.cause == MachineReadyPayload::Cause::Completion) {
            const JobId id = plant_->complete_current(t);
            Event obs;
            obs.seq = truth_.next_seq++;
            obs.channel = Channel::Physical;
            obs.job_id = id;
            obs.kind = EventKind::Completion;
            obs.true_time = t;
            obs.visible_time = t + truth_.jobs[static_cast<std::size_t>(id)].completion_lag;
            calendar_.push_delivery(obs);
            if (options_.record_trace) trace_.push_back(obs);
        }
        if (t < cfg_.horizon) calendar_.push_control(t, {});
    }

    void handle_control(SimTime t, const ControlPayload& c) {
        if (pending_ || !plant_->is_idle(t) || t >= cfg_.horizon) return;

        const std::int64_t epoch = c.relatch ? c.epoch : next_epoch_;
        auto snapshot = cache_->latch(t, kResource, epoch, dispatched_);
        if (observer_.on_latch) observer_.on_latch(*snapshot);

        DecisionRequest request{snapshot, kResource, compute_candidates(*snapshot)};
        if (request.candidates.empty()) return;  // trigger re-arms on the next readiness event
        if (!c.relatch) {
            ++next_epoch_;
            ++epochs_opened_;
        }

        if (c.fallback) {
            ++fallback_commits_;
            max_retries_seen_ = std::max(max_retries_seen_, c.retries);
            commit(t, select_fallback(request), request, epoch, c.retries, true);
            return;
        }

        const JobId intent = policy_.select(request);
        if (std::find(request.candidates.begin(), request.candidates.end(), intent) ==
            request.candidates.end())
            throw std::logic_error("policy returned a job outside the candidate set");

        PendingDecision p;
        p.epoch = epoch;
        p.generation = ++next_generation_;
        p.request = std::move(request);
        p.intent = intent;
        p.latch_time = t;
        p.commit_due = t + cfg_.decision_window;
        p.retries = c.retries;
        max_retries_seen_ = std::max(max_retries_seen_, p.retries);
        calendar_.push_commit_due(p.commit_due, {p.generation});
        pending_ = std::move(p);
    }

    void handle_commit_due(SimTime t, const CommitDuePayload& d) {
        if (!pending_ || pending_->generation != d.generation) return;  // aborted meanwhile
        PendingDecision p = std::move(*pending_);
        pending_.reset();
        commit(t, p.intent, p.request, p.epoch, p.retries, false);
    }

    void commit(SimTime t, JobId intent, const DecisionRequest& request, std::int64_t epoch,
                int retries, bool fallback) {
        const Adjudication adj = plant_->adjudicate_commit(intent, t, request.candidates);

        if (adj.started) {
            dispatched_.insert(*adj.started);
            calendar_.push_machine_ready(*adj.completes_at,
                                         {MachineReadyPayload::Cause::Completion, *adj.started});
        } else if (adj.hold > 0.0) {
            // rejection or fault: failure handling holds the machine
            calendar_.push_machine_ready(t + adj.hold,
                                         {MachineReadyPayload::Cause::HoldReleased, -1});
        } else {
            // cancelled override: only the decision window is lost
            calendar_.push_control(t, {});
        }

        DivergenceRecord rec;
        rec.epoch = epoch;
        rec.intent = intent;
        rec.sys = adj.sys;
        rec.phys = adj.phys;
        rec.human = adj.human;
        rec.commit_time = t;
        rec.arch = arch_;
        rec.phys_blocked_at_commit = adj.phys_blocked;
        rec.fallback = fallback;
        rec.retries = retries;
        rec.visibility = resolve_visibility(rec);
        if (observer_.on_record) observer_.on_record(rec);
        records_.push_back(rec);
    }

    // Ground-truth attribution of how observable the blocking condition was
    // at commit. Uses the earliest-visible window-start event among the
    // channels that truly blocked; a pure human intervention has no
    // observable precursor and is hidden.
    Visibility resolve_visibility(const DivergenceRecord& rec) const {
        if (classify_outcome(rec) == OutcomeCategory::Clean) return Visibility::NotApplicable;
        const Event* blocking = nullptr;
        if (rec.sys == SysOutcome::Rejected)
            blocking = truth_.window_start_event(rec.intent, Channel::Transactional);
        if (rec.phys_blocked_at_commit) {
            const Event* phys = truth_.window_start_event(rec.intent, Channel::Physical);
            if (!blocking || (phys && phys->visible_time < blocking->visible_time)) blocking = phys;
        }
        if (!blocking) return Visibility::Hidden;
        return classify_visibility(rec, *blocking);
    }

    RunResult finalize() {
        RunResult r;
        r.seed = cfg_.seed;
        r.lag_bounds = cfg_.lag;
        r.lag_label = lag_preset_name(cfg_.lag).value_or("custom");
        r.arch = arch_;
        r.policy = policy_.name;
        r.horizon = cfg_.horizon;
        r.warmup_cutoff = cfg_.warmup_cutoff();
        r.records = std::move(records_);
        r.service_log = plant_->service_log();
        r.trace = std::move(trace_);
        r.generated_jobs = static_cast<std::int64_t>(truth_.jobs.size());
        r.epochs_opened = epochs_opened_;
        r.fallback_commits = fallback_commits_;
        r.max_retries_seen = max_retries_seen_;

        std::set<JobId> in_service_at_horizon;
        for (const auto& s : plant_->service_log())
            if (s.start < cfg_.horizon && s.end > cfg_.horizon) in_service_at_horizon.insert(s.job);

        for (const auto& gj : truth_.jobs) {
            const auto done = plant_->completion_time(gj.job.id);
            if (done) {
                Job j = gj.job;
                j.completion_time = done;
                r.completed_jobs.push_back(j);
            }
            if (done && *done <= cfg_.horizon) ++r.completed_by_horizon;
            else if (in_service_at_horizon.contains(gj.job.id)) ++r.in_service_at_horizon;
            else ++r.waiting_at_horizon;
        }
        return r;
    }

    static constexpr int kResource = 0;

    SimConfig cfg_;
    Architecture arch_;
    Policy policy_;
    SimOptions options_;
    SimObserver observer_;

    PlantTruth truth_;
    std::optional<Plant> plant_;
    std::optional<ExecutionCache> cache_;
    EventCalendar calendar_;

    std::optional<PendingDecision> pending_;
    std::set<JobId> dispatched_;
    std::vector<DivergenceRecord> records_;
    std::vector<Event> trace_;

    std::int64_t next_epoch_ = 0;
    std::int64_t next_generation_ = 0;
    std::int64_t epochs_opened_ = 0;
    std::int64_t fallback_commits_ = 0;
    int max_retries_seen_ = 0;
};

} // namespace dispatchsim
