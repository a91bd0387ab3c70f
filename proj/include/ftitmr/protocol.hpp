#pragma once

#include "ftitmr/bus.hpp"
#include "ftitmr/election.hpp"
#include "ftitmr/fault_model.hpp"
#include "ftitmr/isolation.hpp"
#include "ftitmr/model.hpp"
#include "ftitmr/tmr.hpp"
#include "ftitmr/workload.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace ftitmr {

// Follower-side tracking of the two leaders' heartbeats during fault
// isolation. Inspect-target mismatches must persist for a few observations
// before they count: the secondary learns target changes one message latency
// after the primary, which is not a divergence.
class HeartbeatMonitor {
public:
    enum class Anomaly { none, missing_heartbeat, inspect_mismatch, term_mismatch };

    HeartbeatMonitor(SimTime timeout_ms, int mismatch_threshold)
        : timeout_(timeout_ms), mismatch_threshold_(mismatch_threshold) {}

    void start(SimTime now) {
        started_ = true;
        last_p_ = last_v_ = now;
        inspect_p_ = inspect_v_ = -1;
        mismatch_streak_ = 0;
        stale_term_seen_ = false;
    }

    void on_heartbeat(bool from_secondary, int msg_term, int local_term, int inspecting,
                      SimTime now) {
        if (!started_) return;
        if (msg_term != local_term) {
            stale_term_seen_ = true;
            return;
        }
        if (from_secondary) {
            last_v_ = now;
            inspect_v_ = inspecting;
        } else {
            last_p_ = now;
            inspect_p_ = inspecting;
        }
        if (inspect_p_ >= 0 && inspect_v_ >= 0) {
            if (inspect_p_ != inspect_v_)
                ++mismatch_streak_;
            else
                mismatch_streak_ = 0;
        }
    }

    Anomaly check(SimTime now) const {
        if (!started_) return Anomaly::none;
        if (stale_term_seen_) return Anomaly::term_mismatch;
        if (now - last_p_ > timeout_ || now - last_v_ > timeout_)
            return Anomaly::missing_heartbeat;
        if (mismatch_streak_ >= mismatch_threshold_) return Anomaly::inspect_mismatch;
        return Anomaly::none;
    }

    bool started() const noexcept { return started_; }
    void stop() noexcept { started_ = false; }

private:
    SimTime timeout_;
    int mismatch_threshold_;
    bool started_ = false;
    SimTime last_p_ = 0, last_v_ = 0;
    int inspect_p_ = -1, inspect_v_ = -1;
    int mismatch_streak_ = 0;
    bool stale_term_seen_ = false;
};

struct TermTranscript {
    int term = 0;
    std::map<int, double> validated; // sender -> key as honest voters saw it
    std::set<int> confirmed_primaries;
    std::optional<int> confirmed_secondary;
    std::map<int, int> votes_cast_primary; // voter -> outgoing votes this term
    std::map<int, int> votes_cast_secondary;
};

struct AppliedIsolation {
    int sweep_index = 0;
    int node = -1;
    std::vector<int> disabled;
    std::vector<int> enabled;
};

struct DetectionOutcome {
    bool leaders_confirmed = false;
    bool sweep_completed = false;
    int final_term = 0;
    int primary = -1;
    int secondary = -1;
    int elections_started = 0;
    int reelections = 0;
    int self_heals = 0;
    std::uint64_t protocol_copies = 0;
    int cores_disabled = 0;
    int cores_enabled = 0;
    int orders_lost = 0;
    std::vector<AlertBody> alerts;
    std::vector<AppliedIsolation> applied;
    std::vector<TermTranscript> terms;
};

// One detection round of the FTI protocol: stability-score exchange, primary
// and secondary leader election, heartbeat supervision, and the per-node
// fault-isolation sweep, all running as messages on the simulated bus.
class FtiProtocol {
public:
    FtiProtocol(Kernel& kernel, Bus& bus, std::vector<NodeState>& nodes, const Application& app,
                FaultModel& faults, const ElectionConfig& cfg, Rng master_stream);

    // Executes election + sweep starting at the kernel's current time;
    // returns when the sweep completes, every election attempt is exhausted,
    // or the round cap passes.
    DetectionOutcome run_detection_round(int sweep_index);

    void on_message(const Message& m);

    int term() const noexcept { return term_; }

private:
    struct Agent {
        int id = 0;
        bool participating = false;
        int term = 0;
        int epoch = 0;
        std::map<int, double> keys; // validated report keys this term
        std::map<int, StabilityReport> reports;
        std::set<int> rejected;
        std::set<int> banned;
        int intended_primary = -1;
        int intended_secondary = -1;
        std::set<int> votes_p, votes_v;
        std::set<int> acks_p, acks_v;
        bool claimed_p = false, claimed_v = false;
        bool voted_p = false, voted_v = false;
        bool acked_p = false, acked_v = false;
        int primary = -1, secondary = -1;
        bool confirmed_self_p = false, confirmed_self_v = false;
        HeartbeatMonitor monitor{0, 0};
        bool anomaly_wait = false;
        bool watch_timer = false;
        int synced_inspect = -1; // secondary's view of the inspected node
    };

    struct SweepState {
        bool active = false;
        int target = 0;
        int request_core = 0;
        std::set<int> unresponsive;
        std::map<int, CoreVerdict> verdicts;
        std::vector<DtPartition> working;
        int core = -1;
        std::size_t entry = 0;
        int rep = 0;
        std::uint64_t ref_token = 0;
        std::uint64_t pending_tag = 0;
        // reference executors for the current target (normally the leader
        // pair; the other leader + arbiter when a leader is inspected)
        int checker_a = -1, checker_b = -1;
        std::uint64_t ref_tok_a = 0, ref_tok_b = 0;
        bool ref_done_a = false, ref_done_b = false;
        bool ref_ok_a = false, ref_ok_b = false;
        // the leaders execute each disputed task once per target; identical
        // records in other core partitions reuse the agreed reference
        std::map<std::pair<int, std::uint64_t>, std::uint64_t> ref_cache;
    };

    enum class ExecKind { ref_a, ref_b, target_rep, arbiter, verdict_ack };
    struct PendingExec {
        ExecKind kind;
        bool retried = false;
        int dst_node = -1;
        int dst_core = kContactCore;
        ExecOrderBody order;
        VerdictOrderBody verdict;
    };

    // --- election ---
    void start_election_attempt();
    void begin_term_state();
    void broadcast_report(Agent& a, int epoch);
    void vote_phase(Agent& a, int epoch);
    void restart_check(int epoch, int attempt);
    void handle_report(Agent& a, const Message& m, const SsReportBody& b);
    void handle_vote(Agent& a, const Message& m, const VoteBody& b);
    void handle_vote_request(Agent& a, const Message& m, const VoteRequestBody& b);
    void handle_claim(Agent& a, const Message& m, const LeaderClaimBody& b);
    void handle_ack(Agent& a, const Message& m, const AckBody& b);
    void confirmed_primary(Agent& a);
    void confirmed_secondary(Agent& a);

    // --- heartbeats ---
    void start_watch(Agent& a);
    void heartbeat_tick(int node, int epoch);
    void watch_tick(int node, int epoch);
    void handle_heartbeat(Agent& a, const Message& m, const HeartbeatBody& b);
    void anomaly(Agent& a);
    void reelect(std::set<int> ban);

    // --- sweep ---
    void start_sweep();
    void begin_target();
    void request_dtlist();
    void handle_dtlist_request(const Message& m, const DtListRequestBody& b);
    void handle_dtlist_reply(const Message& m, const DtListReplyBody& b);
    void dtlist_timeout(std::uint64_t tag, int epoch);
    void check_next_core();
    void check_entry();
    void collect_refs(int task_id, std::uint64_t input);
    void refs_resolved();
    void send_target_rep();
    void handle_exec_order(const Message& m, const ExecOrderBody& b);
    void handle_exec_result(const Message& m, const ExecOrderBody& b);
    void exec_timeout(std::uint64_t tag, int epoch);
    void resolve_exec(std::uint64_t tag, std::uint64_t token, bool responded);
    void core_verdict(CoreVerdict verdict);
    void apply_verdicts();
    void handle_verdict_order(const Message& m, const VerdictOrderBody& b);
    void advance_target();
    int arbiter_designate(const std::set<int>& exclude) const;
    void self_heal(int task_id, std::uint64_t input);
    void finish_self_heal();
    void finish_round(bool swept);

    // --- plumbing ---
    struct InteractionPlan {
        bool send = true;
        int term_delta = 0;
        bool corrupt = false;
    };
    InteractionPlan interact(int node, int core);
    CoreState& contact_core_of(int node);
    Agent& agent(int node) { return agents_[static_cast<std::size_t>(node)]; }
    NodeState& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Task& task_by_id(int id) const;
    int majority() const noexcept { return n_ / 2 + 1; }
    std::uint64_t execute_on(int node_id, int core_index, int task_id, std::uint64_t input);
    void send_from(int node_id, int core_index, CoreAddr dst, Payload body, int term_delta,
                   bool corrupt);
    void broadcast_from(int node_id, int core_index, Payload body, int term_delta, bool corrupt);
    TermTranscript& transcript();

    Kernel& kernel_;
    Bus& bus_;
    std::vector<NodeState>& nodes_;
    const Application& app_;
    FaultModel& faults_;
    ElectionConfig cfg_;
    int n_;
    int term_ = 0;
    int epoch_ = 0;
    int attempt_ = 0;
    int sweep_index_ = 0;
    bool done_ = false;
    int leader_p_ = -1;
    int leader_v_ = -1;
    std::vector<bool> node_fault_free_;
    std::vector<Agent> agents_;
    SweepState sweep_;
    DetectionOutcome outcome_;
    std::map<int, const Task*> task_index_;
    std::map<std::uint64_t, PendingExec> pending_exec_;
    std::uint64_t next_tag_ = 1;

    // self-heal bookkeeping
    bool healing_ = false;
    int heal_arbiter_ = -1;
    int heal_task_ = -1;
    std::uint64_t heal_input_ = 0;
    std::vector<std::uint64_t> heal_results_;
    int heal_pending_ = 0;

    std::vector<Rng> delay_streams_;
    std::vector<Rng> contact_streams_;
    std::vector<Rng> accident_streams_;
    std::vector<Rng> exec_streams_;
};

} // namespace ftitmr
