#pragma once

#include "ftitmr/fault_model.hpp"
#include "ftitmr/model.hpp"
#include "ftitmr/sim.hpp"
#include "ftitmr/workload.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace ftitmr {

enum class PolicyKind { c_tmr, tp_tmr, tp_tmr_plus, r_tmr, fti_tmr };

const char* to_string(PolicyKind policy) noexcept;
PolicyKind policy_from_string(std::string_view name);

// True for the policies that run a two-copy mandatory phase and execute the
// third copy on demand.
inline constexpr bool two_phase(PolicyKind p) noexcept { return p != PolicyKind::c_tmr; }

// True for the policies that spread a task's replicas over distinct cores.
inline constexpr bool distinct_core_rule(PolicyKind p) noexcept {
    return p == PolicyKind::tp_tmr_plus || p == PolicyKind::r_tmr || p == PolicyKind::fti_tmr;
}

struct VoteOutcome {
    bool system_failure = false;
    std::uint64_t value = 0; // winning token when !system_failure
    bool disputed = false;
    int copies_executed = 0; // 2 or 3
    int failed_copies = 0;   // replicas whose output != the canonical correct token
};

struct ReplicaAssignment {
    int task_id = 0;
    int replica = 0; // 0,1 mandatory; 2 on-demand (always run under c_tmr)
    int core = 0;
    SimTime start_ms = 0;
};

struct Schedule {
    std::vector<ReplicaAssignment> assignments;
};

// Chooses the cores for one task's (up to) three replicas under `policy`,
// given per-core busy-until times. Mandatory replicas of the distinct-core
// policies never share a core while at least two cores are enabled; the
// on-demand replica avoids both mandatory cores when a third one exists.
std::array<int, 3> plan_replica_cores(PolicyKind policy, const std::vector<SimTime>& free_at,
                                      const std::vector<char>& enabled, SimTime ready);

// Static scheduling plan for a full application: LTF list scheduling for DAG
// applications, FCFS for independent ones. Used for placement audits; the
// round executor derives placements dynamically with the same rules.
Schedule build_schedule(const Application& app, PolicyKind policy,
                        const std::vector<int>& enabled_cores);

// Executes and votes one task. `run(replica, core)` performs the copy and
// returns its outcome; it is invoked only for the replicas the policy
// actually executes (all three for c_tmr, third on mismatch otherwise).
VoteOutcome run_task_tmr(PolicyKind policy, const std::array<int, 3>& cores,
                         const std::function<CopyOutcome(int, int)>& run);

// R-TMR's history-based permanent-fault detector: a core whose output loses
// the vote in `threshold` consecutive voting rounds is disabled. In the
// injected-broken mode the first firing disables a random healthy core
// instead and the detector never fires again.
class RtmrDetector {
public:
    RtmrDetector(int cores, int threshold, bool broken)
        : streak_(static_cast<std::size_t>(cores), 0), threshold_(threshold), broken_(broken) {}

    // Observes one majority vote; returns the core to disable, if any.
    std::optional<int> observe(const std::vector<std::pair<int, bool>>& copy_lost,
                               const NodeState& node, Rng& stream);

    bool broken() const noexcept { return broken_; }

private:
    std::vector<int> streak_;
    int threshold_;
    bool broken_;
    bool fired_broken_ = false;
};

struct RoundResult {
    std::uint64_t mandatory_copies = 0;
    std::uint64_t on_demand_copies = 0;
    std::uint64_t votes = 0;
    std::uint64_t disputes = 0;
    std::uint64_t system_failures = 0;
    std::uint64_t migrations = 0;
    std::uint64_t disables = 0;
    bool failed = false; // some task had >= 2 failed copies
    SimTime makespan_ms = 0;
    std::uint64_t digest = 0;
};

// Runs one full application round on one node: dynamic list scheduling,
// fault-model sampling, voting, dispute recording into every core's DTList,
// and (for r_tmr) the history detector. Mutates the node's counters, lists
// and enabled flags.
RoundResult run_round(NodeState& node, const Application& app, PolicyKind policy,
                      FaultModel& faults, Rng& fault_stream, int round_index,
                      RtmrDetector* detector = nullptr, Rng* detector_stream = nullptr);

// Input token of a task executed in a given round; the canonical correct
// result of a copy is TokenMint::correct_token(task, input_token).
std::uint64_t round_input_token(int task_id, int round_index) noexcept;

} // namespace ftitmr
