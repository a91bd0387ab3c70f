#pragma once

#include "ftitmr/election.hpp"
#include "ftitmr/fault_model.hpp"
#include "ftitmr/isolation.hpp"
#include "ftitmr/tmr.hpp"
#include "ftitmr/workload.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ftitmr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RandomAppSpec {
    int count = 200;
    double duration_lo = 1.0;
    double duration_hi = 10.0;
};

struct ApplicationSpec {
    std::string stg_path;                // used when non-empty
    std::optional<RandomAppSpec> random; // otherwise
    std::string label() const;
};

struct RtmrConfig {
    int loss_threshold = 3;
    bool detector_broken = false;
};

struct ScenarioConfig {
    std::string name = "scenario";
    int n_nodes = 9;
    int cores_per_node = 4;
    // faulty cores per node (highest core indices of the node are the faulty
    // ones); default mirrors the mixed campaign: five clean nodes, then nodes
    // with 1..4 broken cores
    std::vector<int> faulty_cores;
    PolicyKind policy = PolicyKind::tp_tmr_plus;
    ApplicationSpec application;
    int runs_per_node = 100;
    TransientFaultConfig transient;
    double correct_result_prob = 0.0;
    double accident_prob = 0.5;
    int detection_initial = 2;
    int detection_cap = 100;
    SimTime message_latency_ms = 1.0;
    RtmrConfig rtmr;
    ElectionConfig election;
    std::uint64_t seed = 1;
    // test hook: cores logically disabled before the first round, as if a
    // previous isolation pass had mistakenly switched them off
    std::map<int, std::set<int>> predisabled;
    bool verbose_trace = false; // event log on stderr; not part of the file format

    void validate() const;
    std::set<int> faulty_set(int node) const;
};

struct CoreSnapshot {
    int node = 0;
    int core = 0;
    bool faulty = false;
    bool enabled = true;
};

struct TermTranscriptSummary {
    int term = 0;
    std::map<int, double> validated;
    std::set<int> confirmed_primaries;
    std::optional<int> confirmed_secondary;
    int max_votes_per_node_primary = 0;
    int max_votes_per_node_secondary = 0;
};

struct AppliedIsolationRecord {
    int sweep_index = 0;
    int node = -1;
    std::vector<int> disabled;
    std::vector<int> enabled;
};

struct RunMetrics {
    std::string scenario;
    std::string policy;
    std::string application;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    // per-copy transient-fault probability across the task-duration range
    double f_task_min = 0.0;
    double f_task_mean = 0.0;
    double f_task_max = 0.0;

    std::uint64_t mandatory_copies = 0;
    std::uint64_t on_demand_copies = 0;
    std::uint64_t protocol_copies = 0;
    std::uint64_t executed_copies() const {
        return mandatory_copies + on_demand_copies + protocol_copies;
    }

    std::uint64_t applications_total = 0;
    std::uint64_t failed_applications = 0;
    double pof = 0.0;

    std::uint64_t votes = 0;
    std::uint64_t disputes = 0;
    std::uint64_t system_failures = 0;
    std::uint64_t migrations = 0;
    std::uint64_t rtmr_disables = 0;

    std::uint64_t cores_disabled = 0;
    std::uint64_t cores_enabled = 0;
    std::uint64_t alerts_unresponsive = 0;
    std::uint64_t alerts_all_faulty = 0;
    std::uint64_t elections_started = 0;
    std::uint64_t leaders_confirmed = 0;
    std::uint64_t reelections = 0;
    std::uint64_t self_heals = 0;
    std::uint64_t sweeps_completed = 0;
    std::uint64_t sweeps_attempted = 0;
    std::uint64_t orders_lost = 0;

    std::uint64_t trace_hash = 0;
    std::uint64_t bus_fifo_violations = 0;
    std::uint64_t bus_sent = 0;
    std::uint64_t bus_delivered = 0;

    std::vector<CoreSnapshot> final_cores;
    // protocol audit trails (fti_tmr only)
    std::vector<TermTranscriptSummary> transcripts;
    std::vector<AppliedIsolationRecord> applied;
    std::vector<std::pair<int, int>> alerts; // (node, kind 0=unresponsive 1=all faulty)

    bool healthy_core_disabled() const {
        for (const auto& c : final_cores)
            if (!c.faulty && !c.enabled) return true;
        return false;
    }
    bool faulty_core_enabled() const {
        for (const auto& c : final_cores)
            if (c.faulty && c.enabled) return true;
        return false;
    }
};

// Loads/stores the scenario text format (JSON with the schema documented in
// the README); relative STG paths resolve against `base_dir`.
ScenarioConfig load_scenario_file(const std::string& path);
ScenarioConfig scenario_from_json_text(const std::string& text, const std::string& base_dir);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

// Materializes the application named by the scenario.
Application resolve_application(const ScenarioConfig& cfg);

// Executes one scenario end to end and aggregates the metrics.
RunMetrics run_scenario(const ScenarioConfig& cfg);

} // namespace ftitmr
