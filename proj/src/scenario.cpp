#include "ftitmr/scenario.hpp"

#include "ftitmr/bus.hpp"
#include "ftitmr/protocol.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ftitmr {

using nlohmann::json;

std::string ApplicationSpec::label() const {
    if (!stg_path.empty()) return std::filesystem::path(stg_path).stem().string();
    if (random) return "random" + std::to_string(random->count);
    return "unset";
}

std::set<int> ScenarioConfig::faulty_set(int node) const {
    std::set<int> out;
    const int k = node < static_cast<int>(faulty_cores.size())
                      ? faulty_cores[static_cast<std::size_t>(node)]
                      : 0;
    for (int c = cores_per_node - k; c < cores_per_node; ++c) out.insert(c);
    return out;
}

void ScenarioConfig::validate() const {
    if (cores_per_node < 3) throw ConfigError("cores_per_node must be >= 3");
    if (policy == PolicyKind::fti_tmr && n_nodes < 3)
        throw ConfigError("fti_tmr needs at least 3 nodes for majority voting");
    if (n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
    if (runs_per_node < 1) throw ConfigError("runs_per_node must be >= 1");
    if (static_cast<int>(faulty_cores.size()) > n_nodes)
        throw ConfigError("faulty_cores lists more nodes than n_nodes");
    for (int k : faulty_cores)
        if (k < 0 || k > cores_per_node)
            throw ConfigError("faulty core count out of range for node");
    if (detection_initial < 2 || detection_cap < detection_initial || detection_cap > 100)
        throw ConfigError("detection schedule must satisfy 2 <= initial <= cap <= 100");
    if (message_latency_ms <= 0) throw ConfigError("message latency must be positive");
    if (rtmr.loss_threshold < 1) throw ConfigError("rtmr loss threshold must be >= 1");
    if (application.stg_path.empty() && !application.random)
        throw ConfigError("scenario names no application");
    transient.validate();
    PermanentFaultConfig pc;
    pc.correct_result_prob = correct_result_prob;
    pc.accident_prob = accident_prob;
    pc.validate();
    for (const auto& [node, cores] : predisabled) {
        if (node < 0 || node >= n_nodes) throw ConfigError("predisabled: bad node id");
        for (int c : cores)
            if (c < 0 || c >= cores_per_node) throw ConfigError("predisabled: bad core index");
    }
}

namespace {

ScenarioConfig parse_scenario(const json& j, const std::string& base_dir) {
    ScenarioConfig cfg;
    cfg.name = j.value("name", cfg.name);
    cfg.n_nodes = j.value("nodes", cfg.n_nodes);
    cfg.cores_per_node = j.value("cores_per_node", cfg.cores_per_node);
    if (j.contains("faulty_cores"))
        cfg.faulty_cores = j.at("faulty_cores").get<std::vector<int>>();
    if (j.contains("policy")) cfg.policy = policy_from_string(j.at("policy").get<std::string>());
    cfg.runs_per_node = j.value("runs_per_node", cfg.runs_per_node);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.message_latency_ms = j.value("message_latency_ms", cfg.message_latency_ms);

    if (j.contains("application")) {
        const json& app = j.at("application");
        const std::string kind = app.value("kind", "stg");
        if (kind == "stg") {
            std::filesystem::path p = app.at("path").get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
            cfg.application.stg_path = p.string();
        } else if (kind == "random") {
            RandomAppSpec r;
            r.count = app.value("count", r.count);
            r.duration_lo = app.value("duration_min", r.duration_lo);
            r.duration_hi = app.value("duration_max", r.duration_hi);
            cfg.application.random = r;
        } else {
            throw ConfigError("unknown application kind '" + kind + "'");
        }
    }

    if (j.contains("transient")) {
        const json& t = j.at("transient");
        cfg.transient.lambda0 = t.value("lambda0", cfg.transient.lambda0);
        cfg.transient.d = t.value("d", cfg.transient.d);
        cfg.transient.s_level = t.value("s_level", cfg.transient.s_level);
        cfg.transient.s_min = t.value("s_min", cfg.transient.s_min);
    }
    if (j.contains("permanent")) {
        const json& p = j.at("permanent");
        cfg.correct_result_prob = p.value("correct_result_prob", cfg.correct_result_prob);
        cfg.accident_prob = p.value("accident_prob", cfg.accident_prob);
    }
    if (j.contains("detection")) {
        const json& d = j.at("detection");
        cfg.detection_initial = d.value("initial_period", cfg.detection_initial);
        cfg.detection_cap = d.value("max_period", cfg.detection_cap);
    }
    if (j.contains("rtmr")) {
        const json& r = j.at("rtmr");
        cfg.rtmr.loss_threshold = r.value("loss_threshold", cfg.rtmr.loss_threshold);
        cfg.rtmr.detector_broken = r.value("detector_broken", cfg.rtmr.detector_broken);
    }
    if (j.contains("election")) {
        const json& e = j.at("election");
        cfg.election.ss_exchange_ms = e.value("ss_exchange_ms", cfg.election.ss_exchange_ms);
        cfg.election.vote_phase_ms = e.value("vote_phase_ms", cfg.election.vote_phase_ms);
        cfg.election.ack_phase_ms = e.value("ack_phase_ms", cfg.election.ack_phase_ms);
        cfg.election.heartbeat_interval_ms =
            e.value("heartbeat_interval_ms", cfg.election.heartbeat_interval_ms);
        cfg.election.heartbeat_timeout_ms =
            e.value("heartbeat_timeout_ms", cfg.election.heartbeat_timeout_ms);
    }
    if (j.contains("predisabled"))
        for (const auto& [key, val] : j.at("predisabled").items())
            for (int c : val.get<std::vector<int>>())
                cfg.predisabled[std::stoi(key)].insert(c);

    cfg.validate();
    return cfg;
}

} // namespace

ScenarioConfig scenario_from_json_text(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
    try {
        return parse_scenario(j, base_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario field error: ") + e.what());
    }
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_json_text(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["nodes"] = cfg.n_nodes;
    j["cores_per_node"] = cfg.cores_per_node;
    j["faulty_cores"] = cfg.faulty_cores;
    j["policy"] = to_string(cfg.policy);
    j["runs_per_node"] = cfg.runs_per_node;
    j["seed"] = cfg.seed;
    j["message_latency_ms"] = cfg.message_latency_ms;
    if (!cfg.application.stg_path.empty()) {
        j["application"] = {{"kind", "stg"}, {"path", cfg.application.stg_path}};
    } else if (cfg.application.random) {
        j["application"] = {{"kind", "random"},
                            {"count", cfg.application.random->count},
                            {"duration_min", cfg.application.random->duration_lo},
                            {"duration_max", cfg.application.random->duration_hi}};
    }
    j["transient"] = {{"lambda0", cfg.transient.lambda0},
                      {"d", cfg.transient.d},
                      {"s_level", cfg.transient.s_level},
                      {"s_min", cfg.transient.s_min}};
    j["permanent"] = {{"correct_result_prob", cfg.correct_result_prob},
                      {"accident_prob", cfg.accident_prob}};
    j["detection"] = {{"initial_period", cfg.detection_initial}, {"max_period", cfg.detection_cap}};
    j["rtmr"] = {{"loss_threshold", cfg.rtmr.loss_threshold},
                 {"detector_broken", cfg.rtmr.detector_broken}};
    if (!cfg.predisabled.empty()) {
        json pd = json::object();
        for (const auto& [node, cores] : cfg.predisabled)
            pd[std::to_string(node)] = std::vector<int>(cores.begin(), cores.end());
        j["predisabled"] = pd;
    }
    return j.dump(2) + "\n";
}

Application resolve_application(const ScenarioConfig& cfg) {
    if (!cfg.application.stg_path.empty()) {
        std::ifstream in(cfg.application.stg_path);
        if (!in) throw ConfigError("cannot open STG file '" + cfg.application.stg_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_stg(ss.str(), cfg.application.label());
    }
    const RandomAppSpec& r = *cfg.application.random;
    return generate_random_app(r.count, r.duration_lo, r.duration_hi, cfg.seed);
}

RunMetrics run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const Application app = resolve_application(cfg);
    validate(app);

    RunMetrics metrics;
    metrics.scenario = cfg.name;
    metrics.policy = to_string(cfg.policy);
    metrics.application = cfg.application.label();
    metrics.seed = cfg.seed;
    metrics.lambda = transient_rate(cfg.transient);
    {
        double lo = 0, hi = 0, sum = 0;
        std::size_t count = 0;
        for (const auto& t : app.tasks) {
            if (t.is_dummy()) continue;
            if (count == 0) lo = hi = t.duration_s;
            lo = std::min(lo, t.duration_s);
            hi = std::max(hi, t.duration_s);
            sum += t.duration_s;
            ++count;
        }
        if (count > 0) {
            metrics.f_task_min = transient_fault_prob(metrics.lambda, lo);
            metrics.f_task_mean =
                transient_fault_prob(metrics.lambda, sum / static_cast<double>(count));
            metrics.f_task_max = transient_fault_prob(metrics.lambda, hi);
        }
    }

    PermanentFaultConfig permanent;
    permanent.correct_result_prob = cfg.correct_result_prob;
    permanent.accident_prob = cfg.accident_prob;
    for (int i = 0; i < cfg.n_nodes; ++i) {
        auto set = cfg.faulty_set(i);
        if (!set.empty()) permanent.faulty_cores[i] = std::move(set);
    }
    FaultModel faults(cfg.transient, permanent);

    std::vector<NodeState> nodes(static_cast<std::size_t>(cfg.n_nodes));
    for (int i = 0; i < cfg.n_nodes; ++i) {
        NodeState& nd = nodes[static_cast<std::size_t>(i)];
        nd.id = i;
        const auto faulty = cfg.faulty_set(i);
        for (int c = 0; c < cfg.cores_per_node; ++c) {
            CoreState core;
            core.node_id = i;
            core.core_index = c;
            core.health =
                faulty.count(c) ? CoreHealth::permanent_fault : CoreHealth::healthy;
            auto pre = cfg.predisabled.find(i);
            if (pre != cfg.predisabled.end() && pre->second.count(c)) core.enabled = false;
            nd.cores.push_back(std::move(core));
        }
    }

    Kernel kernel;
    if (cfg.verbose_trace)
        kernel.on_event = [](SimTime t, const EventMeta& meta) {
            std::fprintf(stderr, "%12.3f %-16s src=%lld dst=%lld term=%lld\n", t, meta.label,
                         static_cast<long long>(meta.a), static_cast<long long>(meta.b),
                         static_cast<long long>(meta.c));
        };
    Bus bus(kernel, cfg.message_latency_ms);
    Rng master(cfg.seed);
    std::vector<Rng> fault_streams;
    std::vector<Rng> rtmr_streams;
    for (int i = 0; i < cfg.n_nodes; ++i) {
        fault_streams.push_back(master.fork("fault-injection").fork(static_cast<std::uint64_t>(i)));
        rtmr_streams.push_back(master.fork("rtmr-detector").fork(static_cast<std::uint64_t>(i)));
    }

    std::vector<RtmrDetector> detectors;
    if (cfg.policy == PolicyKind::r_tmr)
        for (int i = 0; i < cfg.n_nodes; ++i)
            detectors.emplace_back(cfg.cores_per_node, cfg.rtmr.loss_threshold,
                                   cfg.rtmr.detector_broken);

    std::unique_ptr<FtiProtocol> protocol;
    if (cfg.policy == PolicyKind::fti_tmr)
        protocol = std::make_unique<FtiProtocol>(kernel, bus, nodes, app, faults, cfg.election,
                                                 master.fork("protocol"));

    DetectionSchedule schedule;
    schedule.initial = cfg.detection_initial;
    schedule.cap = cfg.detection_cap;
    schedule.reset();
    int sweep_index = 0;

    metrics.applications_total =
        static_cast<std::uint64_t>(cfg.runs_per_node) * static_cast<std::uint64_t>(cfg.n_nodes);

    for (int round = 1; round <= cfg.runs_per_node; ++round) {
        SimTime round_span = 0;
        for (int i = 0; i < cfg.n_nodes; ++i) {
            NodeState& nd = nodes[static_cast<std::size_t>(i)];
            RtmrDetector* det =
                cfg.policy == PolicyKind::r_tmr ? &detectors[static_cast<std::size_t>(i)] : nullptr;
            Rng* det_stream = det ? &rtmr_streams[static_cast<std::size_t>(i)] : nullptr;
            const RoundResult res = run_round(nd, app, cfg.policy, faults,
                                              fault_streams[static_cast<std::size_t>(i)], round,
                                              det, det_stream);
            metrics.mandatory_copies += res.mandatory_copies;
            metrics.on_demand_copies += res.on_demand_copies;
            metrics.votes += res.votes;
            metrics.disputes += res.disputes;
            metrics.system_failures += res.system_failures;
            metrics.migrations += res.migrations;
            metrics.rtmr_disables += res.disables;
            if (res.failed) ++metrics.failed_applications;
            round_span = std::max(round_span, res.makespan_ms);
            kernel.trace().ingest(res.digest);
            if (cfg.verbose_trace)
                std::fprintf(stderr, "%12.3f %-16s node=%d failed=%d copies=%llu+%llu\n",
                             kernel.now(), "round", i, res.failed ? 1 : 0,
                             static_cast<unsigned long long>(res.mandatory_copies),
                             static_cast<unsigned long long>(res.on_demand_copies));
        }
        kernel.reset_to(kernel.now() + round_span + 1.0);

        if (protocol && schedule.due(round)) {
            ++metrics.sweeps_attempted;
            const DetectionOutcome out = protocol->run_detection_round(sweep_index);
            ++sweep_index;
            metrics.protocol_copies += out.protocol_copies;
            metrics.cores_disabled += static_cast<std::uint64_t>(out.cores_disabled);
            metrics.cores_enabled += static_cast<std::uint64_t>(out.cores_enabled);
            metrics.elections_started += static_cast<std::uint64_t>(out.elections_started);
            metrics.reelections += static_cast<std::uint64_t>(out.reelections);
            metrics.self_heals += static_cast<std::uint64_t>(out.self_heals);
            metrics.orders_lost += static_cast<std::uint64_t>(out.orders_lost);
            if (out.leaders_confirmed) ++metrics.leaders_confirmed;
            for (const auto& alert : out.alerts) {
                metrics.alerts.emplace_back(alert.node,
                                            alert.kind == AlertKind::all_cores_faulty ? 1 : 0);
                if (alert.kind == AlertKind::all_cores_faulty)
                    ++metrics.alerts_all_faulty;
                else
                    ++metrics.alerts_unresponsive;
            }
            for (const auto& t : out.terms) {
                TermTranscriptSummary s;
                s.term = t.term;
                s.validated = t.validated;
                s.confirmed_primaries = t.confirmed_primaries;
                s.confirmed_secondary = t.confirmed_secondary;
                for (const auto& [node_id, count] : t.votes_cast_primary)
                    s.max_votes_per_node_primary = std::max(s.max_votes_per_node_primary, count);
                for (const auto& [node_id, count] : t.votes_cast_secondary)
                    s.max_votes_per_node_secondary =
                        std::max(s.max_votes_per_node_secondary, count);
                metrics.transcripts.push_back(std::move(s));
            }
            for (const auto& ap : out.applied)
                metrics.applied.push_back(
                    AppliedIsolationRecord{ap.sweep_index, ap.node, ap.disabled, ap.enabled});
            if (out.sweep_completed) {
                ++metrics.sweeps_completed;
                schedule.completed_sweep();
            } else {
                schedule.next_round += schedule.period;
            }
            kernel.reset_to(kernel.now() + 1.0);
        }
    }

    metrics.pof = metrics.applications_total == 0
                      ? 0.0
                      : static_cast<double>(metrics.failed_applications) /
                            static_cast<double>(metrics.applications_total);
    metrics.trace_hash = kernel.trace().value();
    metrics.bus_fifo_violations = bus.fifo_violations();
    metrics.bus_sent = bus.sent();
    metrics.bus_delivered = bus.delivered();
    for (const auto& nd : nodes)
        for (const auto& c : nd.cores)
            metrics.final_cores.push_back(CoreSnapshot{nd.id, c.core_index, c.faulty(), c.enabled});
    return metrics;
}

} // namespace ftitmr
