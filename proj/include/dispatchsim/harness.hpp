#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "metrics.hpp"
#include "policies.hpp"
#include "simulation.hpp"

namespace dispatchsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One cell of the experimental grid.
struct ScenarioSpec {
    std::string lag_label = "medium";
    UniformBounds lag_bounds = kLagMedium;
    Architecture arch = Architecture::Layer;
    std::string policy = "edd";
    int replications = 50;
    std::uint64_t base_seed = 42;
    SimConfig base;  // lag and seed fields are overwritten per replication

    void set_lag_preset(const std::string& preset) {
        lag_bounds = lag_bounds_for(preset);
        lag_label = preset;
    }

    void set_lag_bounds(UniformBounds b) {
        b.validate("lag");
        lag_bounds = b;
        lag_label = lag_preset_name(b).value_or("custom");
    }

    void validate() const {
        if (replications < 1) throw ConfigError("replications must be >= 1");
        SimConfig c = base;
        c.lag = lag_bounds;
        c.validate();
    }
};

inline ScenarioSpec default_spec() { return ScenarioSpec{}; }

// The full evaluation grid: 3 lag presets x 2 architectures x 2 policies.
inline std::vector<ScenarioSpec> default_grid(const ScenarioSpec& prototype = {}) {
    std::vector<ScenarioSpec> grid;
    for (const char* lag : {"low", "medium", "high"})
        for (Architecture arch : {Architecture::Direct, Architecture::Layer})
            for (const char* policy : {"edd", "spt"}) {
                ScenarioSpec s = prototype;
                s.set_lag_preset(lag);
                s.arch = arch;
                s.policy = policy;
                grid.push_back(std::move(s));
            }
    return grid;
}

inline std::uint64_t replication_seed(const ScenarioSpec& spec, int rep) {
    return StreamFactory::replication_root(spec.base_seed, rep);
}

inline RunResult run_replication(const ScenarioSpec& spec, int rep, SimOptions options = {}) {
    spec.validate();
    SimConfig cfg = spec.base;
    cfg.lag = spec.lag_bounds;
    cfg.seed = replication_seed(spec, rep);
    Simulation sim(cfg, spec.arch, make_policy(spec.policy), options);
    RunResult r = sim.run();
    r.lag_label = spec.lag_label;
    return r;
}

// ---------------------------------------------------------------------------
// Per-run and aggregated reporting

struct PerRunRow {
    std::string lag_label;
    std::string arch;
    std::string policy;
    int rep = 0;
    std::uint64_t seed = 0;
    std::int64_t invalid = 0;
    std::int64_t visible = 0;
    double tardiness = 0.0;
    double throughput_v = 0.0;
    double coverage = 0.0;
    std::int64_t transactional = 0;
    std::int64_t physical = 0;
    std::int64_t combined = 0;
    std::int64_t human_override = 0;
};

inline PerRunRow make_row(const RunResult& r, int rep) {
    PerRunRow row;
    row.lag_label = r.lag_label;
    row.arch = to_string(r.arch);
    row.policy = r.policy;
    row.rep = rep;
    row.seed = r.seed;
    row.invalid = count_invalid(r);
    row.visible = count_visible(r);
    row.tardiness = weighted_tardiness(r).mean_weighted;
    row.throughput_v = throughput(r);
    row.coverage = attribution_coverage(r);
    auto comp = composition_by_type(r);
    row.transactional = comp[OutcomeCategory::Transactional];
    row.physical = comp[OutcomeCategory::Physical];
    row.combined = comp[OutcomeCategory::Combined];
    row.human_override = comp[OutcomeCategory::HumanOverride];
    return row;
}

struct SummaryRow {
    std::string lag_label;
    std::string arch;
    std::string policy;  // "edd", "spt", or "pooled"
    std::size_t n = 0;
    double invalid_mean = 0.0, invalid_hw = 0.0;
    double visible_mean = 0.0, visible_hw = 0.0;
    double tardiness_mean = 0.0, tardiness_hw = 0.0;
    double throughput_mean = 0.0, throughput_hw = 0.0;
    double coverage_mean = 0.0;
    std::int64_t transactional = 0, physical = 0, combined = 0, human_override = 0;
};

namespace detail {

inline int lag_rank(const std::string& label) {
    if (label == "low") return 0;
    if (label == "medium") return 1;
    if (label == "high") return 2;
    return 3;
}

inline int arch_rank(const std::string& a) { return a == "direct" ? 0 : 1; }

inline int policy_rank(const std::string& p) {
    if (p == "edd") return 0;
    if (p == "spt") return 1;
    return 2;  // pooled last
}

inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("malformed number in CSV: '" + s + "'");
    return v;
}

inline SummaryRow summarize_group(const std::string& lag, const std::string& arch,
                                  const std::string& policy,
                                  const std::vector<const PerRunRow*>& rows) {
    SummaryRow s;
    s.lag_label = lag;
    s.arch = arch;
    s.policy = policy;
    s.n = rows.size();
    auto stats = [&](auto getter, double& mean, double& hw) {
        std::vector<double> vals;
        vals.reserve(rows.size());
        for (const auto* r : rows) vals.push_back(static_cast<double>(getter(*r)));
        if (vals.size() >= 2) {
            const AggregateSummary a = aggregate(vals);
            mean = a.mean;
            hw = a.half_width_95;
        } else if (!vals.empty()) {
            mean = vals.front();
            hw = 0.0;
        }
    };
    stats([](const PerRunRow& r) { return r.invalid; }, s.invalid_mean, s.invalid_hw);
    stats([](const PerRunRow& r) { return r.visible; }, s.visible_mean, s.visible_hw);
    stats([](const PerRunRow& r) { return r.tardiness; }, s.tardiness_mean, s.tardiness_hw);
    stats([](const PerRunRow& r) { return r.throughput_v; }, s.throughput_mean, s.throughput_hw);
    double cov = 0.0, cov_hw = 0.0;
    stats([](const PerRunRow& r) { return r.coverage; }, cov, cov_hw);
    s.coverage_mean = cov;
    for (const auto* r : rows) {
        s.transactional += r->transactional;
        s.physical += r->physical;
        s.combined += r->combined;
        s.human_override += r->human_override;
    }
    return s;
}

} // namespace detail

// Per-policy and pooled aggregates for every (lag, arch) group, mirroring the
// evaluation's summary table layout.
inline std::vector<SummaryRow> aggregate_rows(const std::vector<PerRunRow>& rows) {
    std::map<std::tuple<int, std::string, int, std::string>, std::vector<const PerRunRow*>> groups;
    for (const auto& r : rows)
        groups[{detail::lag_rank(r.lag_label), r.lag_label, detail::arch_rank(r.arch), r.arch}]
            .push_back(&r);

    std::vector<SummaryRow> out;
    for (const auto& [key, members] : groups) {
        const std::string& lag = std::get<1>(key);
        const std::string& arch = std::get<3>(key);
        std::map<int, std::pair<std::string, std::vector<const PerRunRow*>>> by_policy;
        for (const auto* r : members) {
            auto& slot = by_policy[detail::policy_rank(r->policy)];
            slot.first = r->policy;
            slot.second.push_back(r);
        }
        for (const auto& [rank, slot] : by_policy)
            out.push_back(detail::summarize_group(lag, arch, slot.first, slot.second));
        if (by_policy.size() > 1) out.push_back(detail::summarize_group(lag, arch, "pooled", members));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV and log files

inline constexpr const char* kPerRunHeader =
    "lag,arch,policy,rep,seed,invalid,visible,weighted_tardiness,throughput,coverage,"
    "transactional,physical,combined,human_override";

inline constexpr const char* kSummaryHeader =
    "lag,arch,policy,n,invalid_mean,invalid_hw95,visible_mean,visible_hw95,"
    "tardiness_mean,tardiness_hw95,throughput_mean,throughput_hw95,coverage_mean,"
    "transactional,physical,combined,human_override";

inline std::string per_run_csv(const std::vector<PerRunRow>& rows) {
    std::string out(kPerRunHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.lag_label + ',' + r.arch + ',' + r.policy + ',' + std::to_string(r.rep) + ',' +
               std::to_string(r.seed) + ',' + std::to_string(r.invalid) + ',' +
               std::to_string(r.visible) + ',' + detail::fmt_double(r.tardiness) + ',' +
               detail::fmt_double(r.throughput_v) + ',' + detail::fmt_double(r.coverage) + ',' +
               std::to_string(r.transactional) + ',' + std::to_string(r.physical) + ',' +
               std::to_string(r.combined) + ',' + std::to_string(r.human_override) + '\n';
    }
    return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out(kSummaryHeader);
    out += '\n';
    for (const auto& s : rows) {
        out += s.lag_label + ',' + s.arch + ',' + s.policy + ',' + std::to_string(s.n) + ',' +
               detail::fmt_double(s.invalid_mean) + ',' + detail::fmt_double(s.invalid_hw) + ',' +
               detail::fmt_double(s.visible_mean) + ',' + detail::fmt_double(s.visible_hw) + ',' +
               detail::fmt_double(s.tardiness_mean) + ',' + detail::fmt_double(s.tardiness_hw) + ',' +
               detail::fmt_double(s.throughput_mean) + ',' + detail::fmt_double(s.throughput_hw) +
               ',' + detail::fmt_double(s.coverage_mean) + ',' + std::to_string(s.transactional) +
               ',' + std::to_string(s.physical) + ',' + std::to_string(s.combined) + ',' +
               std::to_string(s.human_override) + '\n';
    }
    return out;
}

inline std::vector<PerRunRow> parse_per_run_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kPerRunHeader)
        throw ConfigError("per-run CSV: missing or unexpected header");
    std::vector<PerRunRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 14)
            throw ConfigError("per-run CSV line " + std::to_string(lineno) + ": expected 14 fields");
        PerRunRow r;
        r.lag_label = f[0];
        r.arch = f[1];
        r.policy = f[2];
        r.rep = static_cast<int>(detail::parse_double(f[3]));
        r.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
        r.invalid = static_cast<std::int64_t>(detail::parse_double(f[5]));
        r.visible = static_cast<std::int64_t>(detail::parse_double(f[6]));
        r.tardiness = detail::parse_double(f[7]);
        r.throughput_v = detail::parse_double(f[8]);
        r.coverage = detail::parse_double(f[9]);
        r.transactional = static_cast<std::int64_t>(detail::parse_double(f[10]));
        r.physical = static_cast<std::int64_t>(detail::parse_double(f[11]));
        r.combined = static_cast<std::int64_t>(detail::parse_double(f[12]));
        r.human_override = static_cast<std::int64_t>(detail::parse_double(f[13]));
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Sweep runner

struct SweepOptions {
    std::filesystem::path out_dir;  // empty: no files written
    bool emit_divergence_log = false;
    bool emit_trace = false;
    unsigned jobs = 1;  // parallel replication workers
};

struct SweepOutput {
    std::vector<PerRunRow> rows;      // ordered by (lag, arch, policy, rep)
    std::vector<SummaryRow> summary;
    std::vector<RunResult> results;   // same order as rows
};

namespace detail {

// Removes partially written outputs if the sweep aborts mid-write.
class WriteCleanup {
public:
    ~WriteCleanup() {
        if (!armed_) return;
        std::error_code ec;
        for (auto it = paths_.rbegin(); it != paths_.rend(); ++it)
            std::filesystem::remove(*it, ec);
    }
    void track(const std::filesystem::path& p) { paths_.push_back(p); }
    void disarm() { armed_ = false; }

private:
    std::vector<std::filesystem::path> paths_;
    bool armed_ = true;
};

inline void write_file(const std::filesystem::path& p, const std::string& contents,
                       WriteCleanup& cleanup) {
    cleanup.track(p);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

} // namespace detail

inline SweepOutput run_sweep(const std::vector<ScenarioSpec>& specs, const SweepOptions& options) {
    if (specs.empty()) throw ConfigError("sweep requires at least one scenario");
    for (const auto& s : specs) s.validate();

    struct Task {
        std::size_t spec_idx;
        int rep;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < specs.size(); ++i)
        for (int rep = 0; rep < specs[i].replications; ++rep) tasks.push_back({i, rep});

    std::vector<RunResult> results(tasks.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error_message;

    const SimOptions sim_options{options.emit_trace};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= tasks.size() || failed.load()) return;
            const Task& t = tasks[i];
            try {
                results[i] = run_replication(specs[t.spec_idx], t.rep, sim_options);
            } catch (const std::exception& ex) {
                std::lock_guard lock(error_mutex);
                if (!failed.exchange(true))
                    error_message = "replication failed (seed " +
                                    std::to_string(replication_seed(specs[t.spec_idx], t.rep)) +
                                    "): " + ex.what();
                return;
            }
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(options.jobs, std::thread::hardware_concurrency() == 0 ? 1u : std::thread::hardware_concurrency()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw std::runtime_error(error_message);

    // deterministic output order regardless of completion order
    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = specs[tasks[a].spec_idx];
        const auto& sb = specs[tasks[b].spec_idx];
        const auto key = [](const ScenarioSpec& s, int rep) {
            return std::tuple(detail::lag_rank(s.lag_label), s.lag_bounds.low, s.lag_bounds.high,
                              detail::arch_rank(to_string(s.arch)), detail::policy_rank(s.policy),
                              rep);
        };
        return key(sa, tasks[a].rep) < key(sb, tasks[b].rep);
    });

    SweepOutput out;
    out.rows.reserve(tasks.size());
    out.results.reserve(tasks.size());
    for (std::size_t i : order) {
        out.rows.push_back(make_row(results[i], tasks[i].rep));
        out.results.push_back(std::move(results[i]));
    }
    out.summary = aggregate_rows(out.rows);

    if (!options.out_dir.empty()) {
        namespace fs = std::filesystem;
        detail::WriteCleanup cleanup;
        fs::create_directories(options.out_dir);
        detail::write_file(options.out_dir / "per_run.csv", per_run_csv(out.rows), cleanup);
        detail::write_file(options.out_dir / "summary.csv", summary_csv(out.summary), cleanup);
        if (options.emit_divergence_log || options.emit_trace)
            fs::create_directories(options.out_dir / "logs");
        for (std::size_t i = 0; i < out.results.size(); ++i) {
            const RunResult& r = out.results[i];
            const std::string stem = std::to_string(r.seed) + "_" + to_string(r.arch) + "_" +
                                     r.policy + "_" + r.lag_label;
            if (options.emit_divergence_log) {
                std::string body;
                for (const auto& rec : r.records)
                    body += divergence_to_json_line(rec, r.policy, r.seed) + '\n';
                detail::write_file(options.out_dir / "logs" / (stem + ".jsonl"), body, cleanup);
            }
            if (options.emit_trace) {
                std::string body;
                for (const auto& e : r.trace) body += trace_to_json_line(e) + '\n';
                detail::write_file(options.out_dir / "logs" / ("trace_" + stem + ".jsonl"), body,
                                   cleanup);
            }
        }
        cleanup.disarm();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario configuration files: JSON with a `defaults` object applied to
// every entry of `scenarios`. An empty file yields the single default
// scenario. Unknown keys are rejected.

namespace detail {

inline UniformBounds bounds_from_json(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(ctx + ": expected [low, high]");
    UniformBounds b{j[0].get<double>(), j[1].get<double>()};
    b.validate(ctx.c_str());
    return b;
}

inline void apply_scenario_json(ScenarioSpec& spec, const nlohmann::json& obj,
                                const std::string& ctx) {
    if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        const std::string where = ctx + "." + key;
        try {
            if (key == "lag") {
                if (value.is_string()) spec.set_lag_preset(value.get<std::string>());
                else spec.set_lag_bounds(bounds_from_json(value, where));
            } else if (key == "arch") {
                const std::string a = value.get<std::string>();
                if (a == "direct") spec.arch = Architecture::Direct;
                else if (a == "layer") spec.arch = Architecture::Layer;
                else throw ConfigError(where + ": expected 'direct' or 'layer'");
            } else if (key == "policy") {
                spec.policy = value.get<std::string>();
                make_policy(spec.policy);  // reject unknown names now
            } else if (key == "replications") {
                spec.replications = value.get<int>();
            } else if (key == "base_seed") {
                spec.base_seed = value.get<std::uint64_t>();
            } else if (key == "horizon") {
                spec.base.horizon = value.get<double>();
            } else if (key == "warmup_fraction") {
                spec.base.warmup_fraction = value.get<double>();
            } else if (key == "decision_window") {
                spec.base.decision_window = value.get<double>();
            } else if (key == "rejection_delay") {
                spec.base.rejection_delay = value.get<double>();
            } else if (key == "fault_delay") {
                spec.base.fault_delay = value.get<double>();
            } else if (key == "max_reisolations") {
                spec.base.max_reisolations = value.get<int>();
            } else if (key == "p_sys") {
                spec.base.p_sys = value.get<double>();
            } else if (key == "p_phys") {
                spec.base.p_phys = value.get<double>();
            } else if (key == "p_hum") {
                spec.base.p_hum = value.get<double>();
            } else if (key == "processing") {
                spec.base.processing = bounds_from_json(value, where);
            } else if (key == "interarrival") {
                spec.base.interarrival = bounds_from_json(value, where);
            } else if (key == "due_factor") {
                spec.base.due_factor = bounds_from_json(value, where);
            } else if (key == "window_start_offset") {
                spec.base.window_start_offset = bounds_from_json(value, where);
            } else if (key == "window_duration") {
                spec.base.window_duration = bounds_from_json(value, where);
            } else if (key == "weight_min") {
                spec.base.weight_min = value.get<int>();
            } else if (key == "weight_max") {
                spec.base.weight_max = value.get<int>();
            } else {
                throw ConfigError(where + ": unknown key");
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(where + ": " + ex.what());
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(where + ": " + ex.what());
        }
    }
}

} // namespace detail

inline std::vector<ScenarioSpec> load_config(std::istream& in, const std::string& origin = "config") {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {default_spec()};

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError(origin + ": " + ex.what());
    }
    if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");

    ScenarioSpec defaults;
    for (const auto& [key, value] : doc.items()) {
        if (key == "defaults") detail::apply_scenario_json(defaults, value, origin + ".defaults");
        else if (key != "scenarios") throw ConfigError(origin + "." + key + ": unknown key");
    }

    std::vector<ScenarioSpec> specs;
    if (doc.contains("scenarios")) {
        const auto& arr = doc["scenarios"];
        if (!arr.is_array()) throw ConfigError(origin + ".scenarios: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            ScenarioSpec s = defaults;
            detail::apply_scenario_json(s, arr[i],
                                        origin + ".scenarios[" + std::to_string(i) + "]");
            specs.push_back(std::move(s));
        }
    }
    if (specs.empty()) specs.push_back(defaults);
    for (const auto& s : specs) s.validate();
    return specs;
}

inline std::vector<ScenarioSpec> load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    return load_config(in, path.filename().string());
}

} // namespace dispatchsim
