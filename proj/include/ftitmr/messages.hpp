#pragma once

#include "ftitmr/model.hpp"
#include "ftitmr/sim.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace ftitmr {

struct CoreAddr {
    int node = -1;
    int core = -1;
    bool operator==(const CoreAddr&) const = default;
};

// Destination core: a concrete index, or kContactCore to address whichever
// core currently speaks for the node.
inline constexpr int kContactCore = -1;

// Stability report broadcast during the SS-exchange phase (the wire form of
// (S_i, D_i, f_i, F_i, SS_i, term)).
struct SsReportBody {
    std::uint64_t s_total = 0;
    std::uint64_t disputes = 0;
    double f_actual = 0.0;
    double f_max = 0.0;
    double ss = 0.0;
};

struct VoteRequestBody {
    bool secondary = false;
};

struct VoteBody {
    int candidate = -1;
    bool secondary = false;
};

struct LeaderClaimBody {
    int claimant = -1;
    bool secondary = false;
};

struct AckBody {
    int claimant = -1;
    bool secondary = false;
};

struct HeartbeatBody {
    bool from_secondary = false;
    int inspecting = -1;
};

struct DtListRequestBody {
    int target_node = -1;
    int target_core = -1;
    std::uint64_t tag = 0;
};

struct DtListReplyBody {
    int target_node = -1;
    int target_core = -1;
    std::vector<DtPartition> partitions;
    std::uint64_t checksum = 0;
    std::uint64_t tag = 0;
};

// Leader-to-core diagnostic order and its reply, plus the small leader-pair
// synchronization notes that ride the same channel.
struct ExecOrderBody {
    enum class Mode { execute_task, execute_result, inspect_sync, start_sweep, leader_replaced };
    Mode mode = Mode::execute_task;
    int task_id = -1;
    std::uint64_t input_token = 0;
    std::uint64_t result_token = 0;
    std::uint64_t request_tag = 0; // matches replies to orders
    int inspecting = -1;           // inspect_sync / start_sweep
    int new_primary = -1;          // leader_replaced
    int new_secondary = -1;
};

struct VerdictOrderBody {
    int target_node = -1;
    std::vector<int> disable;
    std::vector<int> enable;
    std::vector<DtPartition> cleaned;
    std::uint64_t tag = 0;
};

enum class AlertKind { node_unresponsive, all_cores_faulty };

struct AlertBody {
    int node = -1;
    AlertKind kind = AlertKind::node_unresponsive;
};

using Payload = std::variant<SsReportBody, VoteRequestBody, VoteBody, LeaderClaimBody, AckBody,
                             HeartbeatBody, DtListRequestBody, DtListReplyBody, ExecOrderBody,
                             VerdictOrderBody, AlertBody>;

struct Message {
    CoreAddr src;
    CoreAddr dst; // dst.core == kContactCore addresses the node's agent
    int term = 0;
    Payload body;
    bool corrupted = false;       // wire-level garble; receivers discard
    std::uint64_t sender_seq = 0; // assigned by the bus
};

const char* payload_name(const Payload& p) noexcept;

} // namespace ftitmr
