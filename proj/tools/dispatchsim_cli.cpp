// Command-line front end: `run` executes one scenario, `sweep` the full
// evaluation grid (or a scenario file), `report` re-aggregates an existing
// per-run CSV without re-simulating.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <dispatchsim/harness.hpp>

namespace {

using namespace dispatchsim;

struct CommonFlags {
    std::string lag;
    std::string arch;
    std::string policy;
    int reps = -1;
    std::optional<std::uint64_t> seed;
    double horizon = -1.0;
    std::string out_dir = "out";
    bool emit_trace = false;
    bool emit_divergence_log = false;
    unsigned jobs = 1;
};

void add_common_flags(CLI::App& cmd, CommonFlags& f, bool with_cell_flags) {
    if (with_cell_flags) {
        cmd.add_option("--lag", f.lag, "lag preset (low|medium|high) or explicit bounds lo:hi");
        cmd.add_option("--arch", f.arch, "execution architecture (direct|layer)");
        cmd.add_option("--policy", f.policy, "dispatch policy (edd|spt)");
    }
    cmd.add_option("--reps", f.reps, "replications per scenario");
    cmd.add_option("--seed", f.seed, "base seed");
    cmd.add_option("--horizon", f.horizon, "simulation horizon in time units");
    cmd.add_option("--out-dir", f.out_dir, "output directory");
    cmd.add_flag("--emit-trace", f.emit_trace, "write per-run event traces");
    cmd.add_flag("--emit-divergence-log", f.emit_divergence_log,
                 "write per-run divergence logs (JSONL)");
    cmd.add_option("--jobs", f.jobs, "parallel replication workers");
}

void apply_lag_flag(ScenarioSpec& spec, const std::string& lag) {
    const auto colon = lag.find(':');
    if (colon == std::string::npos) {
        spec.set_lag_preset(lag);
        return;
    }
    UniformBounds b{std::stod(lag.substr(0, colon)), std::stod(lag.substr(colon + 1))};
    spec.set_lag_bounds(b);
}

void apply_flags(std::vector<ScenarioSpec>& specs, const CommonFlags& f) {
    for (auto& s : specs) {
        if (!f.lag.empty()) apply_lag_flag(s, f.lag);
        if (!f.arch.empty()) {
            if (f.arch == "direct") s.arch = Architecture::Direct;
            else if (f.arch == "layer") s.arch = Architecture::Layer;
            else throw ConfigError("--arch: expected 'direct' or 'layer'");
        }
        if (!f.policy.empty()) {
            make_policy(f.policy);
            s.policy = f.policy;
        }
        if (f.reps > 0) s.replications = f.reps;
        if (f.seed) s.base_seed = *f.seed;
        if (f.horizon > 0.0) s.base.horizon = f.horizon;
    }
}

void print_summary(const std::vector<SummaryRow>& summary) {
    std::printf("%-8s %-7s %-7s %5s  %18s %18s %18s %18s\n", "lag", "arch", "policy", "n",
                "invalid", "visible", "tardiness", "throughput");
    for (const auto& s : summary) {
        std::printf("%-8s %-7s %-7s %5zu  %8.2f +- %6.2f %8.2f +- %6.2f %8.2f +- %6.2f %8.4f +- %6.4f\n",
                    s.lag_label.c_str(), s.arch.c_str(), s.policy.c_str(), s.n, s.invalid_mean,
                    s.invalid_hw, s.visible_mean, s.visible_hw, s.tardiness_mean, s.tardiness_hw,
                    s.throughput_mean, s.throughput_hw);
    }
}

int run_specs(std::vector<ScenarioSpec> specs, const CommonFlags& f) {
    apply_flags(specs, f);
    SweepOptions options;
    options.out_dir = f.out_dir;
    options.emit_divergence_log = f.emit_divergence_log;
    options.emit_trace = f.emit_trace;
    options.jobs = f.jobs;
    const SweepOutput out = run_sweep(specs, options);
    print_summary(out.summary);
    std::printf("wrote %zu runs to %s\n", out.rows.size(), f.out_dir.c_str());
    return 0;
}

int cmd_report(const std::string& out_dir) {
    const auto per_run = std::filesystem::path(out_dir) / "per_run.csv";
    std::ifstream in(per_run);
    if (!in) throw ConfigError("cannot open " + per_run.string());
    const auto rows = parse_per_run_csv(in);
    const auto summary = aggregate_rows(rows);
    std::ofstream outf(std::filesystem::path(out_dir) / "summary.csv", std::ios::binary);
    outf << summary_csv(summary);
    if (!outf) throw std::runtime_error("failed writing summary.csv");
    print_summary(summary);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-driven dispatching testbed: plant simulator, execution layer, metrics"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "simulate a single scenario cell");
    add_common_flags(*run_cmd, run_flags, true);

    CommonFlags sweep_flags;
    std::string config_path;
    auto* sweep_cmd = app.add_subcommand("sweep", "simulate the full evaluation grid");
    sweep_cmd->add_option("--config", config_path, "scenario file (JSON); default: built-in grid");
    add_common_flags(*sweep_cmd, sweep_flags, false);

    std::string report_dir = "out";
    auto* report_cmd = app.add_subcommand("report", "re-aggregate an existing per-run CSV");
    report_cmd->add_option("--out-dir", report_dir, "directory containing per_run.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return run_specs({default_spec()}, run_flags);
        if (sweep_cmd->parsed()) {
            auto specs = config_path.empty() ? default_grid()
                                             : load_config_file(config_path);
            return run_specs(std::move(specs), sweep_flags);
        }
        return cmd_report(report_dir);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
