#include "ftitmr/protocol.hpp"

#include <algorithm>
#include <cassert>

namespace ftitmr {

namespace {
constexpr std::uint64_t kCorruptChecksumMask = 0xbad0bad0bad0bad0ULL;
constexpr double kCorruptSsClaim = 1.7; // out of [0,1], fails validation
} // namespace

FtiProtocol::FtiProtocol(Kernel& kernel, Bus& bus, std::vector<NodeState>& nodes,
                         const Application& app, FaultModel& faults, const ElectionConfig& cfg,
                         Rng master_stream)
    : kernel_(kernel),
      bus_(bus),
      nodes_(nodes),
      app_(app),
      faults_(faults),
      cfg_(cfg),
      n_(static_cast<int>(nodes.size())) {
    agents_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        agents_[static_cast<std::size_t>(i)].id = i;
        delay_streams_.push_back(master_stream.fork("delays").fork(static_cast<std::uint64_t>(i)));
        contact_streams_.push_back(
            master_stream.fork("contact-core").fork(static_cast<std::uint64_t>(i)));
        accident_streams_.push_back(
            master_stream.fork("accidents").fork(static_cast<std::uint64_t>(i)));
        exec_streams_.push_back(
            master_stream.fork("protocol-exec").fork(static_cast<std::uint64_t>(i)));
        bool fault_free = true;
        for (const auto& c : nodes_[static_cast<std::size_t>(i)].cores)
            if (c.faulty()) fault_free = false;
        node_fault_free_.push_back(fault_free);
    }
    for (const auto& t : app_.tasks) task_index_[t.id] = &t;
    bus_.set_deliver([this](const Message& m) { on_message(m); });
}

const Task& FtiProtocol::task_by_id(int id) const { return *task_index_.at(id); }

TermTranscript& FtiProtocol::transcript() { return outcome_.terms.back(); }

CoreState& FtiProtocol::contact_core_of(int node_id) {
    NodeState& nd = node(node_id);
    const int c = nd.contact_core.value_or(0);
    return nd.cores.at(static_cast<std::size_t>(c));
}

FtiProtocol::InteractionPlan FtiProtocol::interact(int node_id, int core_index) {
    const CoreState& core = node(node_id).cores.at(static_cast<std::size_t>(core_index));
    const AccidentKind kind =
        faults_.sample_accident(core, accident_streams_[static_cast<std::size_t>(node_id)]);
    InteractionPlan plan;
    switch (kind) {
        case AccidentKind::none: break;
        case AccidentKind::crash: plan.send = false; break;
        case AccidentKind::timeout:
            bus_.hold_sender(CoreAddr{node_id, core_index}, kernel_.now() + cfg_.accident_hold_ms);
            break;
        case AccidentKind::stale_term: plan.term_delta = -1; break;
        case AccidentKind::corrupt_payload: plan.corrupt = true; break;
    }
    return plan;
}

std::uint64_t FtiProtocol::execute_on(int node_id, int core_index, int task_id,
                                      std::uint64_t input) {
    const CoreState& core = node(node_id).cores.at(static_cast<std::size_t>(core_index));
    const CopyOutcome oc = faults_.sample_copy_outcome(
        core, task_by_id(task_id), input, exec_streams_[static_cast<std::size_t>(node_id)]);
    ++outcome_.protocol_copies;
    return oc.token;
}

void FtiProtocol::send_from(int node_id, int core_index, CoreAddr dst, Payload body,
                            int term_delta, bool corrupt) {
    Message m;
    m.src = CoreAddr{node_id, core_index};
    m.dst = dst;
    m.term = agent(node_id).term + term_delta;
    m.body = std::move(body);
    m.corrupted = corrupt;
    bus_.send(std::move(m));
}

void FtiProtocol::broadcast_from(int node_id, int core_index, Payload body, int term_delta,
                                 bool corrupt) {
    Message m;
    m.src = CoreAddr{node_id, core_index};
    m.term = agent(node_id).term + term_delta;
    m.body = std::move(body);
    m.corrupted = corrupt;
    bus_.broadcast(std::move(m), n_);
}

// ---------------------------------------------------------------------------
// detection round driver

DetectionOutcome FtiProtocol::run_detection_round(int sweep_index) {
    outcome_ = DetectionOutcome{};
    sweep_index_ = sweep_index;
    attempt_ = 0;
    done_ = false;
    sweep_ = SweepState{};
    healing_ = false;
    pending_exec_.clear();

    const SimTime cap = kernel_.now() + cfg_.detection_round_cap_ms;
    start_election_attempt();
    kernel_.run(cap);
    if (!done_) finish_round(false);

    outcome_.final_term = term_;
    outcome_.primary = leader_p_;
    outcome_.secondary = leader_v_;
    return outcome_;
}

void FtiProtocol::start_election_attempt() {
    ++term_;
    ++epoch_;
    ++attempt_;
    ++outcome_.elections_started;
    sweep_ = SweepState{};
    healing_ = false;
    pending_exec_.clear();
    leader_p_ = leader_v_ = -1;
    outcome_.terms.push_back(TermTranscript{term_, {}, {}, std::nullopt, {}, {}});

    if (attempt_ > cfg_.max_election_restarts) {
        finish_round(false);
        return;
    }

    begin_term_state();

    const SimTime t0 = kernel_.now();
    const int epoch = epoch_;
    for (auto& a : agents_) {
        if (!a.participating) continue;
        const SimTime delay =
            delay_streams_[static_cast<std::size_t>(a.id)].uniform(cfg_.delay_lo_ms,
                                                                   cfg_.delay_hi_ms);
        const int id = a.id;
        kernel_.schedule(t0 + delay, EventMeta{"contact_select", id, 0, term_},
                         [this, id, epoch] { broadcast_report(agent(id), epoch); });
        kernel_.schedule(t0 + cfg_.ss_exchange_ms, EventMeta{"vote_phase", id, 0, term_},
                         [this, id, epoch] { vote_phase(agent(id), epoch); });
    }
    const int attempt = attempt_;
    kernel_.schedule(t0 + cfg_.election_attempt_ms(),
                     EventMeta{"restart_check", 0, 0, term_},
                     [this, epoch, attempt] { restart_check(epoch, attempt); });
}

void FtiProtocol::begin_term_state() {
    for (auto& a : agents_) {
        NodeState& nd = node(a.id);
        nd.role = NodeRole::follower;
        nd.group.clear();
        nd.contact_core.reset();

        std::set<int> ban;
        ban.swap(a.banned); // bans apply to exactly one election

        a = Agent{};
        a.id = nd.id;
        a.term = term_;
        a.banned = std::move(ban);
        a.monitor = HeartbeatMonitor(cfg_.heartbeat_timeout_ms, 3);
        a.participating = !nd.enabled_cores().empty();
        for (auto& c : nd.cores) c.current_term = term_;
    }
}

void FtiProtocol::broadcast_report(Agent& a, int epoch) {
    if (epoch != epoch_ || done_) return;
    NodeState& nd = node(a.id);
    const auto enabled = nd.enabled_cores();
    if (enabled.empty()) return;
    const int contact =
        enabled[contact_streams_[static_cast<std::size_t>(a.id)].below(enabled.size())];
    nd.contact_core = contact;

    const auto plan = interact(a.id, contact);
    if (!plan.send) return;

    SsReportBody body;
    body.s_total = nd.executed_tasks();
    body.disputes = nd.disputes();
    body.f_actual = 0.0;
    body.f_max = 0.0;
    body.ss = compute_ss(body.s_total, body.disputes, body.f_actual, body.f_max);
    if (plan.corrupt) body.ss = kCorruptSsClaim;
    broadcast_from(a.id, contact, body, plan.term_delta, false);
}

void FtiProtocol::handle_report(Agent& a, const Message& m, const SsReportBody& b) {
    if (!a.participating) return;
    StabilityReport r{m.src.node, m.term, b.s_total, b.disputes, b.f_actual, b.f_max, b.ss};
    CandidateEntry entry = validate_report(r, a.term);
    if (a.banned.count(m.src.node)) entry.ss_key = -1.0;
    a.keys[m.src.node] = entry.ss_key;
    if (entry.ss_key < 0)
        a.rejected.insert(m.src.node);
    else
        a.reports[m.src.node] = r;
}

void FtiProtocol::vote_phase(Agent& a, int epoch) {
    if (epoch != epoch_ || done_) return;
    if (!a.participating || !node(a.id).contact_core) return;

    // honest observers snapshot what they validated, for the safety audit
    if (node_fault_free_[static_cast<std::size_t>(a.id)])
        for (const auto& [sender, key] : a.keys) transcript().validated[sender] = key;

    int best = -1;
    double best_key = -1.0;
    for (const auto& [sender, key] : a.keys) {
        if (key < 0) continue;
        CandidateEntry c{sender, key};
        if (best < 0 || c.preferred_over(CandidateEntry{best, best_key})) {
            best = sender;
            best_key = key;
        }
    }
    if (best < 0) return;
    a.intended_primary = best;
    if (a.voted_p) return;
    a.voted_p = true;
    ++transcript().votes_cast_primary[a.id];

    const int contact = *node(a.id).contact_core;
    const auto plan = interact(a.id, contact);
    if (!plan.send) return;
    send_from(a.id, contact, CoreAddr{best, kContactCore}, VoteBody{best, false}, plan.term_delta,
              plan.corrupt);
}

void FtiProtocol::handle_vote(Agent& a, const Message& m, const VoteBody& b) {
    if (m.term != a.term || !a.participating) return;
    if (a.rejected.count(m.src.node)) return;

    if (!b.secondary) {
        if (b.candidate != a.id) return;
        a.votes_p.insert(m.src.node);
        if (static_cast<int>(a.votes_p.size()) >= majority() && !a.claimed_p) {
            a.claimed_p = true;
            const int contact = node(a.id).contact_core.value_or(0);
            const auto plan = interact(a.id, contact);
            if (!plan.send) return;
            broadcast_from(a.id, contact, LeaderClaimBody{a.id, false}, plan.term_delta,
                           plan.corrupt);
        }
    } else {
        if (b.candidate != a.id) return;
        a.votes_v.insert(m.src.node);
        if (static_cast<int>(a.votes_v.size()) >= majority() && !a.claimed_v) {
            a.claimed_v = true;
            const int contact = node(a.id).contact_core.value_or(0);
            const auto plan = interact(a.id, contact);
            if (!plan.send) return;
            broadcast_from(a.id, contact, LeaderClaimBody{a.id, true}, plan.term_delta,
                           plan.corrupt);
        }
    }
}

void FtiProtocol::handle_claim(Agent& a, const Message& m, const LeaderClaimBody& b) {
    if (m.term != a.term || !a.participating) return;
    if (a.rejected.count(b.claimant) || a.banned.count(b.claimant)) return;

    if (!b.secondary) {
        // a claim from anyone but this node's intended candidate is rejected
        if (b.claimant != a.intended_primary || a.acked_p) return;
        a.acked_p = true;
        a.primary = b.claimant;
        const int contact = node(a.id).contact_core.value_or(0);
        const auto plan = interact(a.id, contact);
        if (!plan.send) return;
        send_from(a.id, contact, CoreAddr{b.claimant, kContactCore}, AckBody{b.claimant, false},
                  plan.term_delta, plan.corrupt);
    } else {
        if (a.primary < 0) return;
        if (a.intended_secondary < 0) {
            int best = -1;
            double best_key = -1.0;
            for (const auto& [sender, key] : a.keys) {
                if (key < 0 || sender == a.primary) continue;
                if (best < 0 || CandidateEntry{sender, key}.preferred_over({best, best_key})) {
                    best = sender;
                    best_key = key;
                }
            }
            a.intended_secondary = best;
        }
        if (b.claimant != a.intended_secondary || a.acked_v) return;
        a.acked_v = true;
        a.secondary = b.claimant;
        start_watch(a);
        const int contact = node(a.id).contact_core.value_or(0);
        const auto plan = interact(a.id, contact);
        if (!plan.send) return;
        send_from(a.id, contact, CoreAddr{b.claimant, kContactCore}, AckBody{b.claimant, true},
                  plan.term_delta, plan.corrupt);
    }
}

void FtiProtocol::handle_ack(Agent& a, const Message& m, const AckBody& b) {
    if (m.term != a.term || !a.participating) return;
    if (a.rejected.count(m.src.node)) return;

    if (!b.secondary) {
        if (!a.claimed_p) return;
        a.acks_p.insert(m.src.node);
        node(a.id).group.insert(m.src.node);
        if (static_cast<int>(a.acks_p.size()) >= majority() && !a.confirmed_self_p) {
            confirmed_primary(a);
        } else if (a.confirmed_self_p) {
            // late joiner: bring it into the secondary election
            const int contact = node(a.id).contact_core.value_or(0);
            const auto plan = interact(a.id, contact);
            if (plan.send)
                send_from(a.id, contact, CoreAddr{m.src.node, kContactCore}, VoteRequestBody{true},
                          plan.term_delta, plan.corrupt);
        }
    } else {
        if (!a.claimed_v) return;
        a.acks_v.insert(m.src.node);
        if (static_cast<int>(a.acks_v.size()) >= majority() && !a.confirmed_self_v)
            confirmed_secondary(a);
    }
}

void FtiProtocol::confirmed_primary(Agent& a) {
    a.confirmed_self_p = true;
    a.primary = a.id;
    node(a.id).role = NodeRole::primary_leader;
    leader_p_ = a.id;
    transcript().confirmed_primaries.insert(a.id);

    const int contact = node(a.id).contact_core.value_or(0);
    for (int member : a.acks_p) {
        if (member == a.id) {
            handle_vote_request(a, Message{CoreAddr{a.id, contact}, CoreAddr{a.id, kContactCore},
                                           a.term, VoteRequestBody{true}},
                                VoteRequestBody{true});
            continue;
        }
        const auto plan = interact(a.id, contact);
        if (!plan.send) continue;
        send_from(a.id, contact, CoreAddr{member, kContactCore}, VoteRequestBody{true},
                  plan.term_delta, plan.corrupt);
    }
}

void FtiProtocol::handle_vote_request(Agent& a, const Message& m, const VoteRequestBody& b) {
    if (m.term != a.term || !a.participating || !b.secondary) return;
    if (m.src.node != a.primary) return;
    if (a.voted_v) return;

    int best = -1;
    double best_key = -1.0;
    for (const auto& [sender, key] : a.keys) {
        if (key < 0 || sender == a.primary) continue;
        if (best < 0 || CandidateEntry{sender, key}.preferred_over({best, best_key})) {
            best = sender;
            best_key = key;
        }
    }
    if (best < 0) return;
    a.intended_secondary = best;
    a.voted_v = true;
    ++transcript().votes_cast_secondary[a.id];

    const int contact = node(a.id).contact_core.value_or(0);
    const auto plan = interact(a.id, contact);
    if (!plan.send) return;
    send_from(a.id, contact, CoreAddr{best, kContactCore}, VoteBody{best, true}, plan.term_delta,
              plan.corrupt);
}

void FtiProtocol::confirmed_secondary(Agent& a) {
    a.confirmed_self_v = true;
    a.secondary = a.id;
    node(a.id).role = NodeRole::secondary_leader;
    leader_v_ = a.id;
    transcript().confirmed_secondary = a.id;
    start_watch(a);

    const int id = a.id;
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                     EventMeta{"hb_timer", id, 1, term_},
                     [this, id, epoch] { heartbeat_tick(id, epoch); });

    const int contact = node(a.id).contact_core.value_or(0);
    const auto plan = interact(a.id, contact);
    if (!plan.send) return;
    ExecOrderBody body;
    body.mode = ExecOrderBody::Mode::start_sweep;
    send_from(a.id, contact, CoreAddr{a.primary, kContactCore}, body, plan.term_delta,
              plan.corrupt);
}

void FtiProtocol::restart_check(int epoch, int attempt) {
    if (epoch != epoch_ || done_) return;
    if (sweep_.active) return; // leaders confirmed and sweeping
    (void)attempt;
    start_election_attempt();
}

// ---------------------------------------------------------------------------
// heartbeats

void FtiProtocol::heartbeat_tick(int node_id, int epoch) {
    if (epoch != epoch_ || done_) return;
    Agent& a = agent(node_id);
    const bool is_p = a.confirmed_self_p;
    const bool is_v = a.confirmed_self_v;
    if (!is_p && !is_v) return;

    const int contact = node(node_id).contact_core.value_or(0);
    int inspecting = -1;
    if (is_p)
        inspecting = sweep_.active ? sweep_.target : -1;
    else
        inspecting = a.synced_inspect;

    const auto plan = interact(node_id, contact);
    if (plan.send)
        broadcast_from(node_id, contact, HeartbeatBody{is_v, inspecting}, plan.term_delta,
                       plan.corrupt);

    kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                     EventMeta{"hb_timer", node_id, is_v ? 1 : 0, term_},
                     [this, node_id, epoch] { heartbeat_tick(node_id, epoch); });
}

void FtiProtocol::handle_heartbeat(Agent& a, const Message& m, const HeartbeatBody& b) {
    if (!a.participating) return;
    a.monitor.on_heartbeat(b.from_secondary, m.term, a.term, b.inspecting, kernel_.now());
    if (a.monitor.check(kernel_.now()) != HeartbeatMonitor::Anomaly::none) anomaly(a);
}

void FtiProtocol::watch_tick(int node_id, int epoch) {
    if (epoch != epoch_ || done_) return;
    Agent& a = agent(node_id);
    if (!a.monitor.started()) return;
    if (a.monitor.check(kernel_.now()) != HeartbeatMonitor::Anomaly::none) anomaly(a);
    kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                     EventMeta{"watch", node_id, 0, term_},
                     [this, node_id, epoch] { watch_tick(node_id, epoch); });
}

void FtiProtocol::anomaly(Agent& a) {
    if (a.anomaly_wait) return;
    a.anomaly_wait = true;
    const SimTime delay =
        delay_streams_[static_cast<std::size_t>(a.id)].uniform(cfg_.delay_lo_ms, cfg_.delay_hi_ms);
    const int id = a.id;
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + delay, EventMeta{"anomaly", id, 0, term_},
                     [this, id, epoch] {
                         if (epoch != epoch_ || done_) return;
                         Agent& ag = agent(id);
                         if (ag.monitor.check(kernel_.now()) == HeartbeatMonitor::Anomaly::none)
                             return;
                         std::set<int> ban;
                         if (ag.primary >= 0) ban.insert(ag.primary);
                         if (ag.secondary >= 0) ban.insert(ag.secondary);
                         ++outcome_.reelections;
                         reelect(ban);
                     });
}

void FtiProtocol::reelect(std::set<int> ban) {
    // every honest node observed the same failure evidence; the old leader
    // pair is excluded from the next election
    for (auto& ag : agents_) ag.banned = ban;
    start_election_attempt();
}

// ---------------------------------------------------------------------------
// fault-isolation sweep (driven by the confirmed primary)

void FtiProtocol::start_watch(Agent& a) {
    a.monitor.start(kernel_.now());
    if (a.watch_timer) return;
    a.watch_timer = true;
    const int id = a.id;
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                     EventMeta{"watch", id, 0, term_},
                     [this, id, epoch] { watch_tick(id, epoch); });
}

void FtiProtocol::start_sweep() {
    if (sweep_.active || done_) return;
    sweep_ = SweepState{};
    sweep_.active = true;
    sweep_.target = 0;
    outcome_.leaders_confirmed = true;

    Agent& p = agent(leader_p_);
    start_watch(p);
    const int id = p.id;
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                     EventMeta{"hb_timer", id, 0, term_},
                     [this, id, epoch] { heartbeat_tick(id, epoch); });
    begin_target();
}

int FtiProtocol::arbiter_designate(const std::set<int>& exclude) const {
    const Agent& p = agents_[static_cast<std::size_t>(leader_p_)];
    int best = -1;
    double best_key = -1.0;
    for (const auto& [sender, key] : p.keys) {
        if (key < 0 || exclude.count(sender)) continue;
        if (best < 0 || CandidateEntry{sender, key}.preferred_over({best, best_key})) {
            best = sender;
            best_key = key;
        }
    }
    return best;
}

void FtiProtocol::begin_target() {
    if (done_) return;
    if (sweep_.target >= n_) {
        finish_round(true);
        return;
    }
    const int target = sweep_.target;
    sweep_.request_core = 0;
    sweep_.unresponsive.clear();
    sweep_.verdicts.clear();
    sweep_.working.clear();
    sweep_.ref_cache.clear();
    sweep_.core = -1;

    // leaders are inspected by the other leader plus the arbiter-designate
    if (target == leader_p_ || target == leader_v_) {
        const int other = target == leader_p_ ? leader_v_ : leader_p_;
        const int arb = arbiter_designate({leader_p_, leader_v_, target});
        if (arb < 0) {
            // nobody available to co-check a leader; skip it this sweep
            advance_target();
            return;
        }
        sweep_.checker_a = other;
        sweep_.checker_b = arb;
    } else {
        sweep_.checker_a = leader_p_;
        sweep_.checker_b = leader_v_;
    }

    // keep the secondary's heartbeat target in sync
    Agent& p = agent(leader_p_);
    const int contact = node(p.id).contact_core.value_or(0);
    const auto plan = interact(p.id, contact);
    if (plan.send) {
        ExecOrderBody sync;
        sync.mode = ExecOrderBody::Mode::inspect_sync;
        sync.inspecting = target;
        send_from(p.id, contact, CoreAddr{leader_v_, kContactCore}, sync, plan.term_delta,
                  plan.corrupt);
    }
    request_dtlist();
}

void FtiProtocol::request_dtlist() {
    if (done_ || !sweep_.active) return;
    const int target = sweep_.target;
    NodeState& tn = node(target);
    if (sweep_.request_core >= static_cast<int>(tn.cores.size())) {
        // every core failed to produce an intact list: the entire node is gone
        AlertBody alert{target, AlertKind::node_unresponsive};
        outcome_.alerts.push_back(alert);
        Agent& p = agent(leader_p_);
        const int contact = node(p.id).contact_core.value_or(0);
        const auto plan = interact(p.id, contact);
        if (plan.send) broadcast_from(p.id, contact, alert, plan.term_delta, plan.corrupt);
        advance_target();
        return;
    }

    const std::uint64_t tag = next_tag_++;
    sweep_.pending_tag = tag;
    Agent& p = agent(leader_p_);
    const int contact = node(p.id).contact_core.value_or(0);
    const auto plan = interact(p.id, contact);
    if (plan.send) {
        DtListRequestBody req{target, sweep_.request_core, tag};
        send_from(p.id, contact, CoreAddr{target, sweep_.request_core}, req, plan.term_delta,
                  plan.corrupt);
    }
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                     EventMeta{"dtlist_timeout", target, sweep_.request_core, term_},
                     [this, tag, epoch] { dtlist_timeout(tag, epoch); });
}

void FtiProtocol::handle_dtlist_request(const Message& m, const DtListRequestBody& b) {
    NodeState& tn = node(b.target_node);
    Agent& a = agent(b.target_node);
    if (m.term != a.term) return; // stale leadership; reject the request
    if (b.target_core < 0 || b.target_core >= static_cast<int>(tn.cores.size())) return;

    const auto plan = interact(b.target_node, b.target_core);
    if (!plan.send) return;

    DtListReplyBody reply;
    reply.target_node = b.target_node;
    reply.target_core = b.target_core;
    reply.tag = b.tag;
    for (const auto& c : tn.cores) reply.partitions.push_back(c.dt_list);
    reply.checksum = dtlist_checksum(reply.partitions);
    if (plan.corrupt) reply.checksum ^= kCorruptChecksumMask;
    send_from(b.target_node, b.target_core, m.src, reply, plan.term_delta, false);
}

void FtiProtocol::handle_dtlist_reply(const Message& m, const DtListReplyBody& b) {
    if (!sweep_.active || done_) return;
    if (m.term != agent(leader_p_).term) return;
    if (b.tag != sweep_.pending_tag) return; // late reply; core already skipped
    sweep_.pending_tag = 0;

    if (dtlist_checksum(b.partitions) != b.checksum) {
        // corrupted data counts the same as no response
        sweep_.unresponsive.insert(sweep_.request_core);
        ++sweep_.request_core;
        request_dtlist();
        return;
    }
    sweep_.working = b.partitions;
    sweep_.working.resize(node(sweep_.target).cores.size());
    sweep_.core = -1;
    check_next_core();
}

void FtiProtocol::dtlist_timeout(std::uint64_t tag, int epoch) {
    if (epoch != epoch_ || done_ || !sweep_.active) return;
    if (tag != sweep_.pending_tag) return;
    sweep_.pending_tag = 0;
    sweep_.unresponsive.insert(sweep_.request_core);
    ++sweep_.request_core;
    request_dtlist();
}

void FtiProtocol::check_next_core() {
    if (done_ || !sweep_.active) return;
    ++sweep_.core;
    const int m_cores = static_cast<int>(node(sweep_.target).cores.size());
    if (sweep_.core >= m_cores) {
        apply_verdicts();
        return;
    }
    const int core = sweep_.core;
    if (sweep_.unresponsive.count(core)) {
        sweep_.verdicts[core] = CoreVerdict::unresponsive;
        check_next_core();
        return;
    }
    const DtPartition& part = sweep_.working[static_cast<std::size_t>(core)];
    if (part.empty()) {
        sweep_.verdicts[core] = CoreVerdict::fault_free;
        check_next_core();
        return;
    }
    if (sweep_index_ < core_blocked_until(part)) {
        sweep_.verdicts[core] = CoreVerdict::skipped;
        check_next_core();
        return;
    }
    sweep_.entry = 0;
    check_entry();
}

void FtiProtocol::check_entry() {
    if (done_ || !sweep_.active) return;
    DtPartition& part = sweep_.working[static_cast<std::size_t>(sweep_.core)];
    while (sweep_.entry < part.size() && part[sweep_.entry].passed) ++sweep_.entry;
    if (sweep_.entry >= part.size()) {
        core_verdict(CoreVerdict::fault_free);
        return;
    }
    const DisputedEntry& e = part[sweep_.entry];
    sweep_.rep = 0;
    const auto cached = sweep_.ref_cache.find({e.task_id, e.input_token});
    if (cached != sweep_.ref_cache.end()) {
        sweep_.ref_token = cached->second;
        send_target_rep();
        return;
    }
    collect_refs(e.task_id, e.input_token);
}

void FtiProtocol::collect_refs(int task_id, std::uint64_t input) {
    sweep_.ref_done_a = sweep_.ref_done_b = false;
    sweep_.ref_ok_a = sweep_.ref_ok_b = false;

    auto request_ref = [&](int checker, ExecKind kind, bool& done_flag, bool& ok_flag,
                           std::uint64_t& tok) {
        if (checker == leader_p_) {
            // the orchestrating leader executes its reference locally
            tok = execute_on(checker, node(checker).contact_core.value_or(0), task_id, input);
            done_flag = true;
            ok_flag = true;
            return;
        }
        const std::uint64_t tag = next_tag_++;
        ExecOrderBody order;
        order.mode = ExecOrderBody::Mode::execute_task;
        order.task_id = task_id;
        order.input_token = input;
        order.request_tag = tag;
        pending_exec_[tag] = PendingExec{kind, false, checker, kContactCore, order, {}};

        Agent& p = agent(leader_p_);
        const int contact = node(p.id).contact_core.value_or(0);
        const auto plan = interact(p.id, contact);
        if (plan.send)
            send_from(p.id, contact, CoreAddr{checker, kContactCore}, order, plan.term_delta,
                      plan.corrupt);
        const int epoch = epoch_;
        kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                         EventMeta{"exec_timeout", checker, -1, term_},
                         [this, tag, epoch] { exec_timeout(tag, epoch); });
    };

    request_ref(sweep_.checker_a, ExecKind::ref_a, sweep_.ref_done_a, sweep_.ref_ok_a,
                sweep_.ref_tok_a);
    request_ref(sweep_.checker_b, ExecKind::ref_b, sweep_.ref_done_b, sweep_.ref_ok_b,
                sweep_.ref_tok_b);
    if (sweep_.ref_done_a && sweep_.ref_done_b) refs_resolved();
}

void FtiProtocol::refs_resolved() {
    if (done_ || !sweep_.active) return;
    if (!sweep_.ref_done_a || !sweep_.ref_done_b) return;

    const bool normal_checkers =
        sweep_.checker_a == leader_p_ && sweep_.checker_b == leader_v_;

    if (sweep_.ref_ok_a && sweep_.ref_ok_b && sweep_.ref_tok_a == sweep_.ref_tok_b) {
        sweep_.ref_token = sweep_.ref_tok_a;
        DtPartition& part = sweep_.working[static_cast<std::size_t>(sweep_.core)];
        const DisputedEntry& cur = part[sweep_.entry];
        sweep_.ref_cache[{cur.task_id, cur.input_token}] = sweep_.ref_token;
        sweep_.rep = 0;
        send_target_rep();
        return;
    }

    // the reference executors disagree (or one stayed silent twice)
    ++outcome_.self_heals;
    if (!normal_checkers) {
        // a leader was under inspection and its co-checkers split; fall back
        // to a fresh election without the current pair
        reelect({leader_p_, leader_v_});
        return;
    }
    DtPartition& part = sweep_.working[static_cast<std::size_t>(sweep_.core)];
    const DisputedEntry& e = part[sweep_.entry];
    self_heal(e.task_id, e.input_token);
}

void FtiProtocol::send_target_rep() {
    if (done_ || !sweep_.active) return;
    DtPartition& part = sweep_.working[static_cast<std::size_t>(sweep_.core)];
    const DisputedEntry& e = part[sweep_.entry];

    const std::uint64_t tag = next_tag_++;
    ExecOrderBody order;
    order.mode = ExecOrderBody::Mode::execute_task;
    order.task_id = e.task_id;
    order.input_token = e.input_token;
    order.request_tag = tag;
    pending_exec_[tag] = PendingExec{ExecKind::target_rep, false, sweep_.target, sweep_.core,
                                     order, {}};

    Agent& p = agent(leader_p_);
    const int contact = node(p.id).contact_core.value_or(0);
    const auto plan = interact(p.id, contact);
    if (plan.send)
        send_from(p.id, contact, CoreAddr{sweep_.target, sweep_.core}, order, plan.term_delta,
                  plan.corrupt);
    const int epoch = epoch_;
    kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                     EventMeta{"exec_timeout", sweep_.target, sweep_.core, term_},
                     [this, tag, epoch] { exec_timeout(tag, epoch); });
}

void FtiProtocol::handle_exec_order(const Message& m, const ExecOrderBody& b) {
    switch (b.mode) {
        case ExecOrderBody::Mode::start_sweep:
            if (m.dst.node == leader_p_ && agent(leader_p_).confirmed_self_p) start_sweep();
            return;
        case ExecOrderBody::Mode::inspect_sync: {
            Agent& a = agent(m.dst.node);
            if (m.term == a.term) a.synced_inspect = b.inspecting;
            return;
        }
        case ExecOrderBody::Mode::leader_replaced: {
            Agent& a = agent(m.dst.node);
            if (m.term >= a.term) {
                a.term = m.term;
                a.primary = b.new_primary;
                a.secondary = b.new_secondary;
                a.monitor.start(kernel_.now());
            }
            return;
        }
        case ExecOrderBody::Mode::execute_task: {
            // a diagnostic execution order addressed to a concrete core or to
            // the node's contact core
            Agent& a = agent(m.dst.node);
            if (m.term != a.term) return;
            NodeState& nd = node(m.dst.node);
            const int core_index =
                m.dst.core == kContactCore ? nd.contact_core.value_or(0) : m.dst.core;
            if (core_index < 0 || core_index >= static_cast<int>(nd.cores.size())) return;

            const auto plan = interact(m.dst.node, core_index);
            if (!plan.send) return; // crashed; never executed
            std::uint64_t token = execute_on(m.dst.node, core_index, b.task_id, b.input_token);
            if (plan.corrupt) token = faults_.mint().wrong_token();

            ExecOrderBody reply;
            reply.mode = ExecOrderBody::Mode::execute_result;
            reply.task_id = b.task_id;
            reply.result_token = token;
            reply.request_tag = b.request_tag;
            send_from(m.dst.node, core_index, m.src, reply, plan.term_delta, false);
            return;
        }
        case ExecOrderBody::Mode::execute_result: handle_exec_result(m, b); return;
    }
}

void FtiProtocol::handle_exec_result(const Message& m, const ExecOrderBody& b) {
    // stale replies carry tags that were already cleared, so the tag lookup
    // is the only guard needed
    (void)m;
    resolve_exec(b.request_tag, b.result_token, true);
}

void FtiProtocol::exec_timeout(std::uint64_t tag, int epoch) {
    if (epoch != epoch_ || done_) return;
    auto it = pending_exec_.find(tag);
    if (it == pending_exec_.end()) return;

    PendingExec pend = it->second;
    const bool can_retry = (pend.kind == ExecKind::ref_a || pend.kind == ExecKind::ref_b ||
                            pend.kind == ExecKind::arbiter || pend.kind == ExecKind::verdict_ack) &&
                           !pend.retried;
    pending_exec_.erase(it);
    if (can_retry) {
        const std::uint64_t new_tag = next_tag_++;
        pend.retried = true;
        Agent& p = agent(leader_p_);
        const int contact = node(p.id).contact_core.value_or(0);
        if (pend.kind == ExecKind::verdict_ack) {
            pend.verdict.tag = new_tag;
            pending_exec_[new_tag] = pend;
            const auto plan = interact(p.id, contact);
            if (plan.send)
                send_from(p.id, contact, CoreAddr{pend.dst_node, pend.dst_core}, pend.verdict,
                          plan.term_delta, plan.corrupt);
        } else {
            pend.order.request_tag = new_tag;
            pending_exec_[new_tag] = pend;
            const auto plan = interact(p.id, contact);
            if (plan.send)
                send_from(p.id, contact, CoreAddr{pend.dst_node, pend.dst_core}, pend.order,
                          plan.term_delta, plan.corrupt);
        }
        const int ep = epoch_;
        kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                         EventMeta{"exec_timeout", pend.dst_node, pend.dst_core, term_},
                         [this, new_tag, ep] { exec_timeout(new_tag, ep); });
        return;
    }
    // give up on this order
    if (pend.kind == ExecKind::verdict_ack) {
        ++outcome_.orders_lost;
        return;
    }
    pending_exec_[tag] = pend; // resolve_exec removes it
    resolve_exec(tag, 0, false);
}

void FtiProtocol::resolve_exec(std::uint64_t tag, std::uint64_t token, bool responded) {
    auto it = pending_exec_.find(tag);
    if (it == pending_exec_.end()) return;
    const PendingExec pend = it->second;
    pending_exec_.erase(it);

    switch (pend.kind) {
        case ExecKind::ref_a:
            sweep_.ref_done_a = true;
            sweep_.ref_ok_a = responded;
            sweep_.ref_tok_a = token;
            refs_resolved();
            return;
        case ExecKind::ref_b:
            sweep_.ref_done_b = true;
            sweep_.ref_ok_b = responded;
            sweep_.ref_tok_b = token;
            refs_resolved();
            return;
        case ExecKind::target_rep: {
            if (done_ || !sweep_.active) return;
            DtPartition& part = sweep_.working[static_cast<std::size_t>(sweep_.core)];
            DisputedEntry& e = part[sweep_.entry];
            if (!responded) {
                core_verdict(CoreVerdict::unresponsive);
                return;
            }
            if (token != sweep_.ref_token) {
                ++e.failed_count;
                e.failed_sweep = sweep_index_;
                core_verdict(CoreVerdict::faulty);
                return;
            }
            if (++sweep_.rep >= 3) {
                e.passed = true;
                ++sweep_.entry;
                check_entry();
                return;
            }
            send_target_rep();
            return;
        }
        case ExecKind::arbiter:
            if (responded) heal_results_.push_back(token);
            if (--heal_pending_ <= 0) finish_self_heal();
            return;
        case ExecKind::verdict_ack: return; // order acknowledged
    }
}

void FtiProtocol::core_verdict(CoreVerdict verdict) {
    sweep_.verdicts[sweep_.core] = verdict;
    check_next_core();
}

void FtiProtocol::apply_verdicts() {
    const int target = sweep_.target;
    NodeState& tn = node(target);
    const int m_cores = static_cast<int>(tn.cores.size());

    IsolationVerdict verdict;
    verdict.node_id = target;
    for (int c = 0; c < m_cores; ++c) {
        switch (sweep_.verdicts.count(c) ? sweep_.verdicts[c] : CoreVerdict::unresponsive) {
            case CoreVerdict::fault_free: verdict.fault_free.insert(c); break;
            case CoreVerdict::faulty: verdict.faulty.insert(c); break;
            case CoreVerdict::unresponsive: verdict.unresponsive.insert(c); break;
            case CoreVerdict::skipped: verdict.skipped.insert(c); break;
        }
    }

    Agent& p = agent(leader_p_);
    const int contact = node(p.id).contact_core.value_or(0);

    if (verdict.all_failed()) {
        AlertBody alert{target, AlertKind::all_cores_faulty};
        outcome_.alerts.push_back(alert);
        const auto plan = interact(p.id, contact);
        if (plan.send) broadcast_from(p.id, contact, alert, plan.term_delta, plan.corrupt);
        advance_target();
        return;
    }

    std::vector<int> disable;
    for (int c : verdict.faulty) disable.push_back(c);
    for (int c : verdict.unresponsive) disable.push_back(c);
    std::sort(disable.begin(), disable.end());
    std::vector<int> enable;
    for (int c : verdict.fault_free)
        if (!tn.cores[static_cast<std::size_t>(c)].enabled) enable.push_back(c);

    std::vector<DtPartition> cleaned;
    bool changed = false;
    for (const auto& part : sweep_.working) {
        DtPartition kept = without_passed(part);
        if (kept.size() != part.size()) changed = true;
        for (std::size_t i = 0; i < kept.size(); ++i) changed = changed || kept[i].failed_count > 0;
        cleaned.push_back(std::move(kept));
    }

    outcome_.applied.push_back(AppliedIsolation{sweep_index_, target, disable, enable});

    if (!disable.empty() || !enable.empty() || changed) {
        for (int c : verdict.fault_free) {
            const std::uint64_t tag = next_tag_++;
            VerdictOrderBody order;
            order.target_node = target;
            order.disable = disable;
            order.enable = enable;
            order.cleaned = cleaned;
            order.tag = tag;
            pending_exec_[tag] = PendingExec{ExecKind::verdict_ack, false, target, c, {}, order};
            const auto plan = interact(p.id, contact);
            if (plan.send)
                send_from(p.id, contact, CoreAddr{target, c}, order, plan.term_delta, plan.corrupt);
            const int epoch = epoch_;
            kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                             EventMeta{"exec_timeout", target, c, term_},
                             [this, tag, epoch] { exec_timeout(tag, epoch); });
        }
    }
    advance_target();
}

void FtiProtocol::handle_verdict_order(const Message& m, const VerdictOrderBody& b) {
    Agent& a = agent(b.target_node);
    if (m.term != a.term) return;
    NodeState& tn = node(b.target_node);
    const int self = m.dst.core;
    if (self < 0 || self >= static_cast<int>(tn.cores.size())) return;

    const auto plan = interact(b.target_node, self);
    if (!plan.send) return; // crashed before acting; the order may be retried

    for (int c : b.disable) {
        auto& core = tn.cores[static_cast<std::size_t>(c)];
        if (core.enabled) {
            core.enabled = false;
            ++outcome_.cores_disabled;
        }
    }
    for (int c : b.enable) {
        auto& core = tn.cores[static_cast<std::size_t>(c)];
        if (!core.enabled) {
            core.enabled = true;
            ++outcome_.cores_enabled;
        }
    }
    if (self < static_cast<int>(b.cleaned.size()))
        tn.cores[static_cast<std::size_t>(self)].dt_list = b.cleaned[static_cast<std::size_t>(self)];

    ExecOrderBody ack;
    ack.mode = ExecOrderBody::Mode::execute_result;
    ack.request_tag = b.tag;
    ack.result_token = 0;
    send_from(b.target_node, self, m.src, ack, plan.term_delta, false);
}

void FtiProtocol::advance_target() {
    ++sweep_.target;
    begin_target();
}

void FtiProtocol::self_heal(int task_id, std::uint64_t input) {
    // the leaders disagree: introduce the next most stable node as arbiter
    const int arb = arbiter_designate({leader_p_, leader_v_, sweep_.target});
    if (arb < 0) {
        reelect({leader_p_, leader_v_});
        return;
    }
    healing_ = true;
    heal_arbiter_ = arb;
    heal_task_ = task_id;
    heal_input_ = input;
    heal_results_.clear();
    heal_pending_ = 3;

    Agent& p = agent(leader_p_);
    const int contact = node(p.id).contact_core.value_or(0);
    for (int i = 0; i < 3; ++i) {
        const std::uint64_t tag = next_tag_++;
        ExecOrderBody order;
        order.mode = ExecOrderBody::Mode::execute_task;
        order.task_id = task_id;
        order.input_token = input;
        order.request_tag = tag;
        pending_exec_[tag] = PendingExec{ExecKind::arbiter, false, arb, kContactCore, order, {}};
        const auto plan = interact(p.id, contact);
        if (plan.send)
            send_from(p.id, contact, CoreAddr{arb, kContactCore}, order, plan.term_delta,
                      plan.corrupt);
        const int epoch = epoch_;
        kernel_.schedule(kernel_.now() + cfg_.reply_timeout_ms,
                         EventMeta{"exec_timeout", arb, -1, term_},
                         [this, tag, epoch] { exec_timeout(tag, epoch); });
    }
}

void FtiProtocol::finish_self_heal() {
    healing_ = false;
    // majority of the arbiter's three executions
    std::uint64_t ref = 0;
    bool have_majority = false;
    for (std::size_t i = 0; i < heal_results_.size() && !have_majority; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < heal_results_.size(); ++j)
            if (heal_results_[j] == heal_results_[i]) ++count;
        if (count >= 2) {
            ref = heal_results_[i];
            have_majority = true;
        }
    }
    if (!have_majority) {
        reelect({leader_p_, leader_v_});
        return;
    }

    int new_p = leader_p_;
    int new_v = leader_v_;
    if (sweep_.ref_ok_a && sweep_.ref_tok_a == ref) {
        new_v = heal_arbiter_; // the secondary contradicted the arbiter
    } else if (sweep_.ref_ok_b && sweep_.ref_tok_b == ref) {
        new_p = heal_arbiter_; // the primary contradicted the arbiter
    } else {
        reelect({leader_p_, leader_v_});
        return;
    }

    // install the replacement under a fresh term and restart the sweep
    ++term_;
    ++epoch_;
    pending_exec_.clear();
    outcome_.terms.push_back(TermTranscript{term_, {}, {new_p}, new_v, {}, {}});

    const int old_p = leader_p_, old_v = leader_v_;
    node(old_p).role = NodeRole::follower;
    node(old_v).role = NodeRole::follower;
    leader_p_ = new_p;
    leader_v_ = new_v;
    node(new_p).role = NodeRole::primary_leader;
    node(new_v).role = NodeRole::secondary_leader;

    for (auto& ag : agents_) {
        ag.term = term_;
        ag.primary = new_p;
        ag.secondary = new_v;
        ag.confirmed_self_p = ag.id == new_p;
        ag.confirmed_self_v = ag.id == new_v;
        ag.anomaly_wait = false;
        if (ag.monitor.started()) ag.monitor.start(kernel_.now());
        for (auto& c : node(ag.id).cores) c.current_term = term_;
    }
    if (!node(heal_arbiter_).contact_core)
        node(heal_arbiter_).contact_core = node(heal_arbiter_).enabled_cores().empty()
                                               ? 0
                                               : node(heal_arbiter_).enabled_cores().front();

    const int survivor = new_p == heal_arbiter_ ? new_v : new_p;
    Agent& s = agent(survivor);
    const int contact = node(s.id).contact_core.value_or(0);
    const auto plan = interact(s.id, contact);
    if (plan.send) {
        ExecOrderBody note;
        note.mode = ExecOrderBody::Mode::leader_replaced;
        note.new_primary = new_p;
        note.new_secondary = new_v;
        broadcast_from(s.id, contact, note, plan.term_delta, plan.corrupt);
    }

    // new pair: fresh heartbeat timers and a sweep restart from node 0
    sweep_ = SweepState{};
    sweep_.active = true;
    sweep_.target = 0;
    const int epoch = epoch_;
    for (int leader : {new_p, new_v}) {
        agent(leader).monitor.start(kernel_.now());
        kernel_.schedule(kernel_.now() + cfg_.heartbeat_interval_ms,
                         EventMeta{"hb_timer", leader, 0, term_},
                         [this, leader, epoch] { heartbeat_tick(leader, epoch); });
    }
    begin_target();
}

void FtiProtocol::finish_round(bool swept) {
    done_ = true;
    ++epoch_;
    sweep_.active = false;
    outcome_.sweep_completed = swept;
    pending_exec_.clear();
    for (auto& ag : agents_) ag.monitor.stop();
}

// ---------------------------------------------------------------------------
// message routing

void FtiProtocol::on_message(const Message& m) {
    if (m.corrupted) return; // garbled on the wire; receivers discard
    if (m.dst.node < 0 || m.dst.node >= n_) return;
    Agent& a = agent(m.dst.node);

    if (std::holds_alternative<SsReportBody>(m.body)) {
        handle_report(a, m, std::get<SsReportBody>(m.body));
    } else if (std::holds_alternative<VoteBody>(m.body)) {
        handle_vote(a, m, std::get<VoteBody>(m.body));
    } else if (std::holds_alternative<VoteRequestBody>(m.body)) {
        handle_vote_request(a, m, std::get<VoteRequestBody>(m.body));
    } else if (std::holds_alternative<LeaderClaimBody>(m.body)) {
        handle_claim(a, m, std::get<LeaderClaimBody>(m.body));
    } else if (std::holds_alternative<AckBody>(m.body)) {
        handle_ack(a, m, std::get<AckBody>(m.body));
    } else if (std::holds_alternative<HeartbeatBody>(m.body)) {
        handle_heartbeat(a, m, std::get<HeartbeatBody>(m.body));
    } else if (std::holds_alternative<DtListRequestBody>(m.body)) {
        handle_dtlist_request(m, std::get<DtListRequestBody>(m.body));
    } else if (std::holds_alternative<DtListReplyBody>(m.body)) {
        handle_dtlist_reply(m, std::get<DtListReplyBody>(m.body));
    } else if (std::holds_alternative<ExecOrderBody>(m.body)) {
        handle_exec_order(m, std::get<ExecOrderBody>(m.body));
    } else if (std::holds_alternative<VerdictOrderBody>(m.body)) {
        handle_verdict_order(m, std::get<VerdictOrderBody>(m.body));
    } else if (std::holds_alternative<AlertBody>(m.body)) {
        // informational broadcast; recorded by the leader when emitted
    }
}

} // namespace ftitmr
