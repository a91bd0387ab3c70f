#include "ftitmr/report.hpp"
#include "ftitmr/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace ftitmr;

struct CommonArgs {
    std::string scenario_path;
    std::string out_path;
    std::string format = "text";
    bool verbose_trace = false;

    // scenario field overrides
    std::optional<std::string> policy;
    std::optional<std::uint64_t> seed;
    std::optional<int> nodes, cores, runs;
    std::optional<std::vector<int>> faulty;
    std::optional<std::string> app_stg;
    std::optional<int> random_count;
    std::optional<double> random_min, random_max;
    std::optional<double> lambda0, d, s_level, s_min;
    std::optional<double> epsilon, accident_prob;
    std::optional<double> latency;
    std::optional<int> det_initial, det_cap;
    std::optional<int> rtmr_threshold;
    bool rtmr_broken = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--scenario", args.scenario_path, "scenario file (JSON)");
    cmd->add_option("--out", args.out_path, "write the report here instead of stdout");
    cmd->add_option("--format", args.format, "report format: csv|json|text")
        ->check(CLI::IsMember({"csv", "json", "text"}));
    cmd->add_flag("--verbose-trace", args.verbose_trace, "print one line per kernel event");

    cmd->add_option("--policy", args.policy, "c_tmr|tp_tmr|tp_tmr_plus|r_tmr|fti_tmr");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--nodes", args.nodes, "node count");
    cmd->add_option("--cores", args.cores, "cores per node");
    cmd->add_option("--runs-per-node", args.runs, "application rounds per node");
    cmd->add_option("--faulty-cores", args.faulty,
                    "faulty core count per node, e.g. 0 0 0 0 0 1 2 3 4");
    cmd->add_option("--app-stg", args.app_stg, "STG application file");
    cmd->add_option("--app-random-count", args.random_count, "random app: task count");
    cmd->add_option("--app-random-min", args.random_min, "random app: min duration (s)");
    cmd->add_option("--app-random-max", args.random_max, "random app: max duration (s)");
    cmd->add_option("--lambda0", args.lambda0, "transient fault rate at max level");
    cmd->add_option("--tech-d", args.d, "technology constant d");
    cmd->add_option("--s-level", args.s_level, "voltage/frequency level S");
    cmd->add_option("--s-min", args.s_min, "minimum level S_min");
    cmd->add_option("--epsilon", args.epsilon, "P(faulty core returns a correct result)");
    cmd->add_option("--accident-prob", args.accident_prob,
                    "P(accidental action per protocol interaction)");
    cmd->add_option("--latency-ms", args.latency, "bus latency in simulated ms");
    cmd->add_option("--detection-initial", args.det_initial, "first detection period (rounds)");
    cmd->add_option("--detection-cap", args.det_cap, "detection period cap (rounds)");
    cmd->add_option("--rtmr-threshold", args.rtmr_threshold, "consecutive losses before disable");
    cmd->add_flag("--rtmr-detector-broken", args.rtmr_broken,
                  "inject the broken-detector failure mode");
}

ScenarioConfig build_config(const CommonArgs& args) {
    ScenarioConfig cfg;
    if (!args.scenario_path.empty()) cfg = load_scenario_file(args.scenario_path);

    if (args.policy) cfg.policy = policy_from_string(*args.policy);
    if (args.seed) cfg.seed = *args.seed;
    if (args.nodes) cfg.n_nodes = *args.nodes;
    if (args.cores) cfg.cores_per_node = *args.cores;
    if (args.runs) cfg.runs_per_node = *args.runs;
    if (args.faulty) cfg.faulty_cores = *args.faulty;
    if (args.app_stg) {
        cfg.application.stg_path = *args.app_stg;
        cfg.application.random.reset();
    }
    if (args.random_count) {
        RandomAppSpec r;
        r.count = *args.random_count;
        if (args.random_min) r.duration_lo = *args.random_min;
        if (args.random_max) r.duration_hi = *args.random_max;
        cfg.application.random = r;
        cfg.application.stg_path.clear();
    }
    if (args.lambda0) cfg.transient.lambda0 = *args.lambda0;
    if (args.d) cfg.transient.d = *args.d;
    if (args.s_level) cfg.transient.s_level = *args.s_level;
    if (args.s_min) cfg.transient.s_min = *args.s_min;
    if (args.epsilon) cfg.correct_result_prob = *args.epsilon;
    if (args.accident_prob) cfg.accident_prob = *args.accident_prob;
    if (args.latency) cfg.message_latency_ms = *args.latency;
    if (args.det_initial) cfg.detection_initial = *args.det_initial;
    if (args.det_cap) cfg.detection_cap = *args.det_cap;
    if (args.rtmr_threshold) cfg.rtmr.loss_threshold = *args.rtmr_threshold;
    if (args.rtmr_broken) cfg.rtmr.detector_broken = true;
    cfg.verbose_trace = args.verbose_trace;
    cfg.validate();
    return cfg;
}

int write_out(const CommonArgs& args, const std::string& content) {
    if (args.out_path.empty()) {
        std::cout << content;
        return 0;
    }
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write '" << args.out_path << "'\n";
        return 3;
    }
    out << content;
    return 0;
}

std::vector<PolicyKind> parse_policies(const std::vector<std::string>& names) {
    std::vector<PolicyKind> out;
    for (const auto& n : names) out.push_back(policy_from_string(n));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"ftitmr: TMR policy and fault-isolation protocol simulator"};
    cli.require_subcommand(1);

    CommonArgs run_args, cmp_args, sweep_args;

    CLI::App* run_cmd = cli.add_subcommand("run", "run one scenario and report metrics");
    add_common(run_cmd, run_args);

    CLI::App* cmp_cmd =
        cli.add_subcommand("compare", "run several policies on the identical scenario/seed");
    add_common(cmp_cmd, cmp_args);
    std::vector<std::string> cmp_policies{"c_tmr", "tp_tmr_plus", "r_tmr", "fti_tmr"};
    cmp_cmd->add_option("--policies", cmp_policies, "policies to compare");
    std::vector<std::string> cmp_apps;
    cmp_cmd->add_option("--apps", cmp_apps, "additional STG files, one row per application");

    CLI::App* sweep_cmd =
        cli.add_subcommand("sweep-seeds", "run N consecutive seeds and report mean/stddev");
    add_common(sweep_cmd, sweep_args);
    int n_seeds = 10;
    sweep_cmd->add_option("--seeds", n_seeds, "number of seeds");

    CLI11_PARSE(cli, argc, argv);

    try {
        if (run_cmd->parsed()) {
            ScenarioConfig cfg = build_config(run_args);
            RunMetrics m = run_scenario(cfg);
            return write_out(run_args, render_metrics(m, report_format_from_string(run_args.format)));
        }
        if (cmp_cmd->parsed()) {
            ScenarioConfig cfg = build_config(cmp_args);
            std::vector<ApplicationSpec> apps;
            for (const auto& path : cmp_apps) {
                ApplicationSpec spec;
                spec.stg_path = path;
                apps.push_back(std::move(spec));
            }
            Comparison c = compare_policies(cfg, parse_policies(cmp_policies), apps);
            return write_out(cmp_args,
                             render_comparison(c, report_format_from_string(cmp_args.format)));
        }
        if (sweep_cmd->parsed()) {
            ScenarioConfig cfg = build_config(sweep_args);
            SeedSweep s = sweep_seeds(cfg, n_seeds);
            return write_out(sweep_args,
                             render_sweep(s, report_format_from_string(sweep_args.format)));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const StgParseError& e) {
        std::cerr << "stg error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
