#pragma once

#include "ftitmr/scenario.hpp"

#include <map>
#include <string>
#include <vector>

namespace ftitmr {

enum class ReportFormat { csv, json, text };

ReportFormat report_format_from_string(const std::string& name);

// Single-run report with deterministic field order (same metrics => byte
// identical output).
std::string render_metrics(const RunMetrics& metrics, ReportFormat format);

struct ComparisonRow {
    std::string application;
    std::map<std::string, RunMetrics> by_policy;
};

struct Comparison {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<std::string> policies;
    std::vector<ComparisonRow> rows;
};

// Runs every (application, policy) cell with the identical seed and workload.
Comparison compare_policies(const ScenarioConfig& base, const std::vector<PolicyKind>& policies,
                            const std::vector<ApplicationSpec>& applications);

// Executed-copy table normalized to c_tmr plus the PoF table, with an average
// row across applications.
std::string render_comparison(const Comparison& comparison, ReportFormat format);

struct SeedSweepStats {
    double mean = 0.0;
    double stddev = 0.0;
};

struct SeedSweep {
    std::string scenario;
    std::string policy;
    std::vector<std::uint64_t> seeds;
    std::vector<RunMetrics> runs;
    SeedSweepStats pof;
    SeedSweepStats copies;
};

SeedSweep sweep_seeds(const ScenarioConfig& base, int n_seeds);

std::string render_sweep(const SeedSweep& sweep, ReportFormat format);

} // namespace ftitmr
