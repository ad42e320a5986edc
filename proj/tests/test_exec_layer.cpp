#include <catch2/catch_amalgamated.hpp>

#include <dispatchsim/exec_layer.hpp>

#include "support/builders.hpp"
#include "support/oracle.hpp"

using namespace dispatchsim;

namespace {

Event make_event(SeqNo seq, JobId job, EventKind kind, SimTime true_time, SimTime visible_time) {
    Event e;
    e.seq = seq;
    e.job_id = job;
    e.kind = kind;
    e.channel = (kind == EventKind::FaultStart || kind == EventKind::FaultEnd ||
                 kind == EventKind::Completion)
                    ? Channel::Physical
                    : Channel::Transactional;
    e.true_time = true_time;
    e.visible_time = visible_time;
    return e;
}

std::vector<Job> small_catalog(int n) {
    std::vector<Job> cat;
    for (JobId id = 0; id < n; ++id)
        cat.push_back(Job{.id = id,
                          .arrival_time = static_cast<double>(id),
                          .processing_time = 4.0,
                          .due_date = 20.0 + static_cast<double>(id),
                          .weight = 1.0});
    return cat;
}

} // namespace

TEST_CASE("ingest folds readiness changes") {
    const auto catalog = small_catalog(6);
    ExecutionCache cache(&catalog);
    cache.ingest(make_event(0, 4, EventKind::Arrival, 4.0, 4.0));
    cache.ingest(make_event(1, 4, EventKind::BlockStart, 5.0, 5.5));

    const auto& entry = cache.entries().at(4);
    CHECK(entry.arrived);
    CHECK_FALSE(entry.transactional_ready);
    CHECK(entry.physical_ready);
    CHECK(entry.as_of == 5.0);

    cache.ingest(make_event(2, 4, EventKind::BlockEnd, 7.0, 7.2));
    CHECK(cache.entries().at(4).transactional_ready);
}

TEST_CASE("equal visible times apply in seq order and match the oracle") {
    const auto catalog = small_catalog(2);

    SECTION("later true state wins when delivered in order") {
        std::vector<Event> events{make_event(4, 0, EventKind::Arrival, 1.0, 1.0),
                                  make_event(5, 0, EventKind::BlockStart, 2.0, 4.0),
                                  make_event(6, 0, EventKind::BlockEnd, 3.0, 4.0)};
        ExecutionCache cache(&catalog);
        for (const auto& e : events) cache.ingest(e);
        CHECK(cache.entries().at(0).transactional_ready);
        const auto views = cache.latch(5.0, 0, 0, {})->job_views;
        CHECK(views == oracle::fold_views(events, 5.0, catalog));
    }

    SECTION("stale start delivered after its end is ignored") {
        // end (true 3.0) becomes visible before start (true 2.0)
        std::vector<Event> events{make_event(4, 0, EventKind::Arrival, 1.0, 1.0),
                                  make_event(5, 0, EventKind::BlockStart, 2.0, 6.0),
                                  make_event(6, 0, EventKind::BlockEnd, 3.0, 4.0)};
        ExecutionCache cache(&catalog);
        cache.ingest(events[0]);
        cache.ingest(events[2]);
        cache.ingest(events[1]);
        CHECK(cache.entries().at(0).transactional_ready);
        CHECK(cache.latch(7.0, 0, 0, {})->job_views == oracle::fold_views(events, 7.0, catalog));
    }
}

TEST_CASE("ingesting nothing leaves the cache empty") {
    const auto catalog = small_catalog(1);
    ExecutionCache cache(&catalog);
    CHECK(cache.entries().empty());
    const auto snap = cache.latch(3.0, 0, 7, {});
    CHECK(snap->job_views.empty());
    CHECK(snap->latch_time == 3.0);
    CHECK(snap->epoch == 7);
    CHECK(compute_candidates(*snap).empty());
}

TEST_CASE("watermark regression is a hard error") {
    const auto catalog = small_catalog(2);
    ExecutionCache cache(&catalog);
    cache.ingest(make_event(3, 0, EventKind::Arrival, 1.0, 2.0));
    CHECK_THROWS_AS(cache.ingest(make_event(4, 1, EventKind::Arrival, 1.0, 1.5)),
                    std::logic_error);
    CHECK_THROWS_AS(cache.ingest(make_event(2, 1, EventKind::Arrival, 1.0, 2.0)),
                    std::logic_error);
}

TEST_CASE("latched snapshots are immune to later ingests") {
    const auto catalog = small_catalog(2);
    ExecutionCache cache(&catalog);
    cache.ingest(make_event(0, 0, EventKind::Arrival, 1.0, 1.0));
    const auto snap = cache.latch(2.0, 0, 0, {});
    const std::string before = snapshot_to_json(*snap);

    cache.ingest(make_event(1, 0, EventKind::BlockStart, 2.5, 2.5));
    CHECK(snap->job_views.at(0).readiness.transactional_ready);  // still ready
    CHECK(snapshot_to_json(*snap) == before);
}

TEST_CASE("snapshot equals the brute-force fold over random traces") {
    const int kTraces = 300;
    for (std::uint64_t seed = 0; seed < kTraces; ++seed) {
        const auto trace = testsupport::make_random_trace(seed);
        ExecutionCache cache(&trace.catalog);

        std::vector<Event> delivered = trace.events;
        std::sort(delivered.begin(), delivered.end(), [](const Event& a, const Event& b) {
            if (a.visible_time != b.visible_time) return a.visible_time < b.visible_time;
            return a.seq < b.seq;
        });
        for (const auto& e : delivered)
            if (e.visible_time <= trace.latch_time) cache.ingest(e);

        const auto snap = cache.latch(trace.latch_time, 0, 0, {});
        REQUIRE(snap->job_views == oracle::fold_views(trace.events, trace.latch_time, trace.catalog));
    }
}

TEST_CASE("candidates are the observed-ready intersection, ordered by id") {
    const auto catalog = small_catalog(5);
    ExecutionCache cache(&catalog);
    cache.ingest(make_event(0, 1, EventKind::Arrival, 1.0, 1.0));
    cache.ingest(make_event(1, 2, EventKind::Arrival, 2.0, 2.0));
    cache.ingest(make_event(2, 3, EventKind::Arrival, 3.0, 3.0));
    cache.ingest(make_event(3, 2, EventKind::FaultStart, 3.5, 3.5));
    cache.ingest(make_event(4, 3, EventKind::BlockStart, 4.0, 4.0));

    // {1: (T,T), 2: (T,F), 3: (F,T)} -> {1}
    CHECK(compute_candidates(*cache.latch(5.0, 0, 0, {})) == std::vector<JobId>{1});

    cache.ingest(make_event(5, 2, EventKind::FaultEnd, 6.0, 6.0));
    cache.ingest(make_event(6, 3, EventKind::BlockEnd, 6.0, 6.5));
    CHECK(compute_candidates(*cache.latch(7.0, 0, 0, {})) == std::vector<JobId>{1, 2, 3});

    // dispatched and completed jobs drop out
    CHECK(compute_candidates(*cache.latch(7.0, 0, 0, {2})) == std::vector<JobId>{1, 3});
    cache.ingest(make_event(7, 1, EventKind::Completion, 7.0, 7.0));
    CHECK(compute_candidates(*cache.latch(8.0, 0, 0, {2})) == std::vector<JobId>{3});

    // a job known only through a window event has not arrived yet
    cache.ingest(make_event(8, 4, EventKind::BlockEnd, 8.0, 8.5));
    const auto snap = cache.latch(9.0, 0, 0, {2});
    CHECK(snap->job_views.contains(4));
    CHECK_FALSE(snap->job_views.at(4).arrived);
    CHECK(compute_candidates(*snap) == std::vector<JobId>{3});
}

TEST_CASE("invalidation scope: only intent-removing events abort") {
    PendingDecision pending;
    pending.intent = 5;
    pending.latch_time = 10.0;
    pending.commit_due = 10.85;

    CHECK(check_invalidation(pending, make_event(0, 5, EventKind::BlockStart, 10.0, 10.3)) ==
          InvalidationVerdict::Abort);
    CHECK(check_invalidation(pending, make_event(1, 5, EventKind::FaultStart, 10.0, 10.3)) ==
          InvalidationVerdict::Abort);
    CHECK(check_invalidation(pending, make_event(2, 5, EventKind::Completion, 10.0, 10.3)) ==
          InvalidationVerdict::Abort);
    // other candidates' events and admissibility-restoring events keep
    CHECK(check_invalidation(pending, make_event(3, 6, EventKind::BlockStart, 10.0, 10.3)) ==
          InvalidationVerdict::Keep);
    CHECK(check_invalidation(pending, make_event(4, 5, EventKind::BlockEnd, 10.0, 10.3)) ==
          InvalidationVerdict::Keep);
    CHECK(check_invalidation(pending, make_event(5, 5, EventKind::FaultEnd, 10.0, 10.3)) ==
          InvalidationVerdict::Keep);
    CHECK(check_invalidation(pending, make_event(6, 6, EventKind::Arrival, 10.0, 10.3)) ==
          InvalidationVerdict::Keep);
}
