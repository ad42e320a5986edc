// Acceptance suite: runs the full evaluation grid and checks every release
// criterion at its stated tolerance, printing one PASS/FAIL line per
// criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <dispatchsim/harness.hpp>

#include "support/builders.hpp"
#include "support/oracle.hpp"

using namespace dispatchsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& what) {
    std::printf("%s  criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
    if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing:" + p.string() + ">";
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct CellKey {
    std::string lag, policy;
    int rep;
    bool operator<(const CellKey& o) const {
        return std::tie(lag, policy, rep) < std::tie(o.lag, o.policy, o.rep);
    }
};

} // namespace

int main() {
    const fs::path out_a = fs::temp_directory_path() / "dispatchsim_acceptance_a";
    const fs::path out_b = fs::temp_directory_path() / "dispatchsim_acceptance_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    // ---- full default sweep: 3 lags x 2 architectures x 2 policies x 50 reps
    const auto grid = default_grid();
    SweepOptions opt;
    opt.out_dir = out_a;
    opt.emit_divergence_log = true;
    opt.jobs = std::max(1u, std::thread::hardware_concurrency());

    const auto t0 = std::chrono::steady_clock::now();
    const SweepOutput sweep = run_sweep(grid, opt);
    const double sweep_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // ---- criterion 1: zero visible divergence under the layer, sweep < 5 min
    {
        std::int64_t layer_visible = 0, layer_runs = 0;
        for (const auto& r : sweep.rows)
            if (r.arch == "layer") {
                ++layer_runs;
                layer_visible += r.visible;
            }
        const bool ok = layer_runs == 300 && layer_visible == 0 && sweep.rows.size() == 600 &&
                        sweep_seconds < 300.0;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "zero visible divergence in all %lld layer runs (600-run sweep in %.1fs)",
                      static_cast<long long>(layer_runs), sweep_seconds);
        report(1, ok, buf);
    }

    // index paired cells: (lag, policy, rep) -> invalid per architecture
    std::map<CellKey, std::pair<double, double>> paired;  // direct, layer
    for (const auto& r : sweep.rows) {
        auto& slot = paired[{r.lag_label, r.policy, r.rep}];
        if (r.arch == "direct") slot.first = static_cast<double>(r.invalid);
        else slot.second = static_cast<double>(r.invalid);
    }

    // ---- criterion 2: paired invalid-dispatch reduction at low/medium lag
    {
        bool ok = true;
        std::string detail;
        for (const std::string lag : {"low", "medium"}) {
            int pairs = 0, reduced = 0;
            std::vector<double> diffs;
            for (const auto& [key, inv] : paired) {
                if (key.lag != lag) continue;
                ++pairs;
                if (inv.second <= inv.first) ++reduced;
                diffs.push_back(inv.first - inv.second);
            }
            const double share = static_cast<double>(reduced) / pairs;
            const AggregateSummary ci = aggregate(diffs);
            if (share < 0.95) ok = false;
            if (lag == "medium" && ci.mean - ci.half_width_95 <= 0.0) ok = false;
            char buf[96];
            std::snprintf(buf, sizeof(buf), "[%s: %d/%d pairs, mean drop %.2f+-%.2f] ", lag.c_str(),
                          reduced, pairs, ci.mean, ci.half_width_95);
            detail += buf;
        }
        report(2, ok, "paired layer<=direct invalid counts " + detail);
    }

    // pooled per-(lag, arch) means
    auto pooled_mean = [&](const std::string& lag, const std::string& arch, auto getter) {
        std::vector<double> vals;
        for (const auto& r : sweep.rows)
            if (r.lag_label == lag && r.arch == arch) vals.push_back(getter(r));
        return mean_of(vals);
    };

    // ---- criterion 3: tardiness ratio trend across lag regimes
    {
        const double rl = pooled_mean("low", "layer", [](const PerRunRow& r) { return r.tardiness; }) /
                          pooled_mean("low", "direct", [](const PerRunRow& r) { return r.tardiness; });
        const double rm = pooled_mean("medium", "layer", [](const PerRunRow& r) { return r.tardiness; }) /
                          pooled_mean("medium", "direct", [](const PerRunRow& r) { return r.tardiness; });
        const double rh = pooled_mean("high", "layer", [](const PerRunRow& r) { return r.tardiness; }) /
                          pooled_mean("high", "direct", [](const PerRunRow& r) { return r.tardiness; });
        const bool ok = rl < 0.5 && rm < 0.9 && rh >= 0.8 && rh <= 1.1;
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "tardiness ratio layer/direct: low %.3f (<0.5), medium %.3f (<0.9), high %.3f "
                      "([0.8,1.1])",
                      rl, rm, rh);
        report(3, ok, buf);
    }

    // ---- criterion 4: throughput neutrality and absolute level
    {
        bool ok = true;
        std::string detail;
        std::vector<double> all_thr;
        for (const std::string lag : {"low", "medium", "high"}) {
            const double td = pooled_mean(lag, "direct", [](const PerRunRow& r) { return r.throughput_v; });
            const double tl = pooled_mean(lag, "layer", [](const PerRunRow& r) { return r.throughput_v; });
            const double rel = std::abs(tl - td) / td;
            if (rel >= 0.01) ok = false;
            all_thr.push_back(td);
            all_thr.push_back(tl);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "[%s: %.4f/%.4f] ", lag.c_str(), td, tl);
            detail += buf;
        }
        const double overall = mean_of(all_thr);
        if (!(overall > 0.115 && overall < 0.135)) ok = false;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "mean %.4f in [0.115,0.135]", overall);
        report(4, ok, "throughput neutral <1% per lag " + detail + buf);
    }

    // ---- criterion 5: attribution coverage and composition partition
    {
        bool ok = true;
        for (const auto& r : sweep.rows) {
            if (r.arch == "layer" && r.coverage != 1.0) ok = false;
            if (r.arch == "direct" && r.coverage != 0.0) ok = false;
            if (r.arch == "layer" &&
                r.transactional + r.physical + r.combined + r.human_override != r.invalid)
                ok = false;  // partition must be exact
        }
        std::string detail;
        for (const std::string lag : {"low", "medium", "high"}) {
            std::int64_t tr = 0, ph = 0, co = 0, hu = 0;
            for (const auto& r : sweep.rows)
                if (r.arch == "layer" && r.lag_label == lag) {
                    tr += r.transactional;
                    ph += r.physical;
                    co += r.combined;
                    hu += r.human_override;
                }
            if (tr == 0 || ph == 0 || co == 0 || hu == 0) ok = false;
            char buf[96];
            std::snprintf(buf, sizeof(buf), "[%s: T%lld P%lld C%lld H%lld] ", lag.c_str(),
                          static_cast<long long>(tr), static_cast<long long>(ph),
                          static_cast<long long>(co), static_cast<long long>(hu));
            detail += buf;
        }
        report(5, ok, "coverage 1.0 layer / 0.0 direct; all categories present " + detail);
    }

    // ---- criterion 6: snapshot latching equals the brute-force fold
    {
        int mismatches = 0;
        const int kTraces = 1000;
        for (std::uint64_t seed = 0; seed < kTraces; ++seed) {
            const auto trace = testsupport::make_random_trace(seed ^ 0xACCE5501ull);
            ExecutionCache cache(&trace.catalog);
            std::vector<Event> delivered = trace.events;
            std::sort(delivered.begin(), delivered.end(), [](const Event& a, const Event& b) {
                if (a.visible_time != b.visible_time) return a.visible_time < b.visible_time;
                return a.seq < b.seq;
            });
            for (const auto& e : delivered)
                if (e.visible_time <= trace.latch_time) cache.ingest(e);
            const auto snap = cache.latch(trace.latch_time, 0, 0, {});
            if (snap->job_views != oracle::fold_views(trace.events, trace.latch_time, trace.catalog))
                ++mismatches;
        }
        report(6, mismatches == 0,
               "snapshot oracle equivalence over 1000 randomized traces (exact equality)");
    }

    // ---- criterion 7: byte-identical outputs across repeated sweeps
    {
        SweepOptions opt_b = opt;
        opt_b.out_dir = out_b;
        run_sweep(grid, opt_b);
        bool ok = slurp(out_a / "per_run.csv") == slurp(out_b / "per_run.csv") &&
                  slurp(out_a / "summary.csv") == slurp(out_b / "summary.csv");
        int logs_checked = 0;
        if (ok) {
            for (const auto& entry : fs::directory_iterator(out_a / "logs")) {
                const auto name = entry.path().filename();
                if (slurp(entry.path()) != slurp(out_b / "logs" / name)) {
                    ok = false;
                    break;
                }
                ++logs_checked;
            }
            if (logs_checked != 600) ok = false;
        }
        report(7, ok, "two identical sweeps produce byte-identical CSVs and " +
                          std::to_string(logs_checked) + " divergence logs");
    }

    // ---- criterion 8: formula unit checks
    {
        RunResult hand;
        hand.arch = Architecture::Layer;
        hand.horizon = 100.0;
        hand.warmup_cutoff = 0.0;
        auto add = [&](double completion, double due, double weight) {
            Job j;
            j.id = static_cast<JobId>(hand.completed_jobs.size());
            j.processing_time = 1.0;
            j.due_date = due;
            j.weight = weight;
            j.completion_time = completion;
            hand.completed_jobs.push_back(j);
        };
        add(10.0, 8.0, 2.0);
        add(5.0, 6.0, 1.0);
        add(12.0, 12.0, 3.0);
        const bool tw_ok = std::abs(weighted_tardiness(hand).mean_weighted - 4.0 / 3.0) < 1e-9;

        RunResult scaled = hand;
        for (auto& j : scaled.completed_jobs) j.weight *= 4.5;
        const bool scale_ok = std::abs(weighted_tardiness(scaled).mean_weighted -
                                       4.5 * weighted_tardiness(hand).mean_weighted) < 1e-9;

        const AggregateSummary ci = aggregate({1.0, 3.0});
        const bool ci_ok = ci.mean == 2.0 && ci.half_width_95 == 1.96;

        report(8, tw_ok && scale_ok && ci_ok,
               "T_w hand case 4/3 (1e-9), weight-scaling linearity (1e-9), CI{1,3} half-width 1.96");
    }

    // ---- criterion 9: livelock mitigation under dense invalidations
    {
        SimConfig cfg;
        cfg.horizon = 80.0;
        cfg.warmup_fraction = 0.0;
        cfg.seed = 12;
        cfg.p_sys = 1.0;
        cfg.p_phys = 0.0;
        cfg.p_hum = 0.0;
        cfg.interarrival = UniformBounds{0.1, 0.2};
        cfg.window_start_offset = UniformBounds{0.0, 0.6};
        cfg.window_duration = UniformBounds{50.0, 60.0};
        cfg.lag = UniformBounds{0.1, 0.6};
        const RunResult r = Simulation(cfg, Architecture::Layer, make_policy("edd")).run();
        const bool ok = r.fallback_commits >= 1 && r.max_retries_seen <= cfg.max_reisolations;
        char buf[96];
        std::snprintf(buf, sizeof(buf),
                      "dense invalidations: %lld fallback commits, max %d re-latches (cap 5)",
                      static_cast<long long>(r.fallback_commits), r.max_retries_seen);
        report(9, ok, buf);
    }

    // ---- criterion 10: zero-lag, zero-disturbance mode equivalence
    {
        SimConfig cfg;
        cfg.horizon = 2000.0;
        cfg.seed = 321;
        cfg.p_sys = cfg.p_phys = cfg.p_hum = 0.0;
        cfg.lag = UniformBounds{0.0, 0.0};
        const RunResult rd = Simulation(cfg, Architecture::Direct, make_policy("edd")).run();
        const RunResult rl = Simulation(cfg, Architecture::Layer, make_policy("edd")).run();
        bool ok = rd.records.size() == rl.records.size() && !rd.records.empty();
        if (ok)
            for (std::size_t i = 0; i < rd.records.size(); ++i)
                if (rd.records[i].intent != rl.records[i].intent ||
                    rd.records[i].commit_time != rl.records[i].commit_time)
                    ok = false;
        ok = ok && weighted_tardiness(rd).mean_weighted == weighted_tardiness(rl).mean_weighted;
        report(10, ok, "direct == layer dispatch sequence and T_w at zero lag, zero disturbances");
    }

    fs::remove_all(out_a);
    fs::remove_all(out_b);

    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", failures);
    return 1;
}
