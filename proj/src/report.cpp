#include "ftitmr/report.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ftitmr {

using ordered_json = nlohmann::ordered_json;

ReportFormat report_format_from_string(const std::string& name) {
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    if (name == "text") return ReportFormat::text;
    throw ConfigError("unknown report format '" + name + "' (csv|json|text)");
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ordered_json metrics_json(const RunMetrics& m) {
    ordered_json j;
    j["scenario"] = m.scenario;
    j["policy"] = m.policy;
    j["application"] = m.application;
    j["seed"] = m.seed;
    j["lambda"] = m.lambda;
    j["f_task_min"] = m.f_task_min;
    j["f_task_mean"] = m.f_task_mean;
    j["f_task_max"] = m.f_task_max;
    j["executed_copies"] = m.executed_copies();
    j["mandatory_copies"] = m.mandatory_copies;
    j["on_demand_copies"] = m.on_demand_copies;
    j["protocol_copies"] = m.protocol_copies;
    j["applications_total"] = m.applications_total;
    j["failed_applications"] = m.failed_applications;
    j["pof"] = m.pof;
    j["votes"] = m.votes;
    j["disputes"] = m.disputes;
    j["system_failures"] = m.system_failures;
    j["migrations"] = m.migrations;
    j["rtmr_disables"] = m.rtmr_disables;
    j["cores_disabled"] = m.cores_disabled;
    j["cores_enabled"] = m.cores_enabled;
    j["alerts_unresponsive"] = m.alerts_unresponsive;
    j["alerts_all_faulty"] = m.alerts_all_faulty;
    j["elections_started"] = m.elections_started;
    j["leaders_confirmed"] = m.leaders_confirmed;
    j["reelections"] = m.reelections;
    j["self_heals"] = m.self_heals;
    j["sweeps_attempted"] = m.sweeps_attempted;
    j["sweeps_completed"] = m.sweeps_completed;
    j["orders_lost"] = m.orders_lost;
    j["bus_sent"] = m.bus_sent;
    j["bus_delivered"] = m.bus_delivered;
    j["bus_fifo_violations"] = m.bus_fifo_violations;
    j["trace_hash"] = m.trace_hash;
    return j;
}

} // namespace

std::string render_metrics(const RunMetrics& m, ReportFormat format) {
    const ordered_json j = metrics_json(m);
    switch (format) {
        case ReportFormat::json: return j.dump(2) + "\n";
        case ReportFormat::csv: {
            std::string header, row;
            for (const auto& [key, value] : j.items()) {
                header += key + ",";
                row += (value.is_string() ? value.get<std::string>() : value.dump()) + ",";
            }
            if (!header.empty()) header.pop_back(), row.pop_back();
            return header + "\n" + row + "\n";
        }
        case ReportFormat::text: {
            std::ostringstream out;
            out << "# run " << m.scenario << " policy=" << m.policy << " app=" << m.application
                << " seed=" << m.seed << "\n";
            out << "# lambda=" << fmt(m.lambda) << " F(task)=[" << fmt(m.f_task_min) << ", "
                << fmt(m.f_task_mean) << ", " << fmt(m.f_task_max) << "]\n";
            for (const auto& [key, value] : j.items()) {
                if (key == "scenario" || key == "policy" || key == "application") continue;
                out << "  " << key << " = "
                    << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
            }
            return out.str();
        }
    }
    return {};
}

Comparison compare_policies(const ScenarioConfig& base, const std::vector<PolicyKind>& policies,
                            const std::vector<ApplicationSpec>& applications) {
    Comparison out;
    out.scenario = base.name;
    out.seed = base.seed;
    for (PolicyKind p : policies) out.policies.push_back(to_string(p));

    std::vector<ApplicationSpec> apps = applications;
    if (apps.empty()) apps.push_back(base.application);

    for (const auto& app : apps) {
        ComparisonRow row;
        row.application = app.label();
        for (PolicyKind p : policies) {
            ScenarioConfig cfg = base;
            cfg.policy = p;
            cfg.application = app;
            row.by_policy[to_string(p)] = run_scenario(cfg);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const {
        std::string out;
        auto line = [&out](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += cells[i];
                out += i + 1 == cells.size() ? "\n" : ",";
            }
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }

    std::string aligned() const {
        std::vector<std::size_t> width(header.size(), 0);
        auto widen = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                width[i] = std::max(width[i], cells[i].size());
        };
        widen(header);
        for (const auto& r : rows) widen(r);
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += cells[i];
                out.append(width[i] - cells[i].size() + 2, ' ');
            }
            while (!out.empty() && out.back() == ' ') out.pop_back();
            out += "\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
};

Table copies_table(const Comparison& c, bool normalized) {
    Table t;
    t.header.push_back("application");
    for (const auto& p : c.policies) t.header.push_back(p);
    std::map<std::string, double> totals;
    std::map<std::string, double> base_totals;
    for (const auto& row : c.rows) {
        std::vector<std::string> cells{row.application};
        const double base =
            normalized && row.by_policy.count("c_tmr")
                ? static_cast<double>(row.by_policy.at("c_tmr").executed_copies())
                : 1.0;
        for (const auto& p : c.policies) {
            const double v = static_cast<double>(row.by_policy.at(p).executed_copies());
            totals[p] += v;
            base_totals[p] += base;
            cells.push_back(normalized ? fmt(v / base) : fmt(v));
        }
        t.rows.push_back(std::move(cells));
    }
    if (c.rows.size() > 1) {
        std::vector<std::string> avg{"average"};
        for (const auto& p : c.policies)
            avg.push_back(normalized ? fmt(totals[p] / base_totals[p])
                                     : fmt(totals[p] / static_cast<double>(c.rows.size())));
        t.rows.push_back(std::move(avg));
    }
    return t;
}

Table pof_table(const Comparison& c) {
    Table t;
    t.header.push_back("application");
    for (const auto& p : c.policies) t.header.push_back(p);
    std::map<std::string, double> totals;
    for (const auto& row : c.rows) {
        std::vector<std::string> cells{row.application};
        for (const auto& p : c.policies) {
            const double v = row.by_policy.at(p).pof;
            totals[p] += v;
            cells.push_back(fmt(v));
        }
        t.rows.push_back(std::move(cells));
    }
    if (c.rows.size() > 1) {
        std::vector<std::string> avg{"average"};
        for (const auto& p : c.policies)
            avg.push_back(fmt(totals[p] / static_cast<double>(c.rows.size())));
        t.rows.push_back(std::move(avg));
    }
    return t;
}

} // namespace

std::string render_comparison(const Comparison& c, ReportFormat format) {
    if (format == ReportFormat::json) {
        ordered_json j;
        j["scenario"] = c.scenario;
        j["seed"] = c.seed;
        j["policies"] = c.policies;
        ordered_json rows = ordered_json::array();
        for (const auto& row : c.rows) {
            ordered_json r;
            r["application"] = row.application;
            for (const auto& p : c.policies) r[p] = metrics_json(row.by_policy.at(p));
            rows.push_back(std::move(r));
        }
        j["rows"] = std::move(rows);
        return j.dump(2) + "\n";
    }
    const Table copies = copies_table(c, true);
    const Table pof = pof_table(c);
    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out << "# scenario=" << c.scenario << " seed=" << c.seed << "\n";
        out << "# executed copies (normalized to c_tmr)\n" << copies.csv();
        out << "# probability of failure\n" << pof.csv();
    } else {
        out << "scenario " << c.scenario << " (seed " << c.seed << ")\n\n";
        out << "executed copies, normalized to c_tmr\n" << copies.aligned() << "\n";
        out << "probability of failure\n" << pof.aligned();
    }
    return out.str();
}

SeedSweep sweep_seeds(const ScenarioConfig& base, int n_seeds) {
    if (n_seeds < 1) throw ConfigError("sweep needs at least one seed");
    SeedSweep sweep;
    sweep.scenario = base.name;
    sweep.policy = to_string(base.policy);
    double pof_sum = 0, pof_sq = 0, cp_sum = 0, cp_sq = 0;
    for (int i = 0; i < n_seeds; ++i) {
        ScenarioConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(i);
        RunMetrics m = run_scenario(cfg);
        pof_sum += m.pof;
        pof_sq += m.pof * m.pof;
        const double copies = static_cast<double>(m.executed_copies());
        cp_sum += copies;
        cp_sq += copies * copies;
        sweep.seeds.push_back(cfg.seed);
        sweep.runs.push_back(std::move(m));
    }
    const double n = static_cast<double>(n_seeds);
    sweep.pof.mean = pof_sum / n;
    sweep.pof.stddev = std::sqrt(std::max(0.0, pof_sq / n - sweep.pof.mean * sweep.pof.mean));
    sweep.copies.mean = cp_sum / n;
    sweep.copies.stddev =
        std::sqrt(std::max(0.0, cp_sq / n - sweep.copies.mean * sweep.copies.mean));
    return sweep;
}

std::string render_sweep(const SeedSweep& sweep, ReportFormat format) {
    if (format == ReportFormat::json) {
        ordered_json j;
        j["scenario"] = sweep.scenario;
        j["policy"] = sweep.policy;
        j["seeds"] = sweep.seeds;
        j["pof_mean"] = sweep.pof.mean;
        j["pof_stddev"] = sweep.pof.stddev;
        j["copies_mean"] = sweep.copies.mean;
        j["copies_stddev"] = sweep.copies.stddev;
        ordered_json runs = ordered_json::array();
        for (const auto& m : sweep.runs) runs.push_back(metrics_json(m));
        j["runs"] = std::move(runs);
        return j.dump(2) + "\n";
    }
    Table t;
    t.header = {"seed", "pof", "executed_copies", "trace_hash"};
    for (const auto& m : sweep.runs)
        t.rows.push_back({std::to_string(m.seed), fmt(m.pof),
                          std::to_string(m.executed_copies()), std::to_string(m.trace_hash)});
    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out << "# scenario=" << sweep.scenario << " policy=" << sweep.policy << "\n";
        out << t.csv();
        out << "# pof " << fmt(sweep.pof.mean) << " +- " << fmt(sweep.pof.stddev) << "\n";
        out << "# copies " << fmt(sweep.copies.mean) << " +- " << fmt(sweep.copies.stddev) << "\n";
    } else {
        out << "scenario " << sweep.scenario << " policy " << sweep.policy << "\n";
        out << t.aligned();
        out << "pof    " << fmt(sweep.pof.mean) << " +- " << fmt(sweep.pof.stddev) << "\n";
        out << "copies " << fmt(sweep.copies.mean) << " +- " << fmt(sweep.copies.stddev) << "\n";
    }
    return out.str();
}

} // namespace ftitmr
