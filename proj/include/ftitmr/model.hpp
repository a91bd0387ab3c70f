#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftitmr {

enum class CoreHealth { healthy, permanent_fault };

// One disputed-task record. Every core of a node keeps an identical copy of
// each record; `failed_count`/`failed_sweep` drive the re-check backoff.
struct DisputedEntry {
    int task_id = 0;
    std::uint64_t input_token = 0;
    bool passed = false;
    int failed_count = 0;
    int failed_sweep = -1;
};

using DtPartition = std::vector<DisputedEntry>;

struct CoreState {
    int node_id = 0;
    int core_index = 0;
    CoreHealth health = CoreHealth::healthy;
    bool enabled = true; // logical isolation flag; toggled only by verdict orders
    // Node-level counters, replicated on every core like the DTList itself:
    // executed_tasks counts completed task votes of the node (S_i), and
    // dispute_counter the disputed ones (D_i), so dispute_counter <=
    // executed_tasks holds by construction.
    std::uint64_t executed_tasks = 0;
    std::uint64_t dispute_counter = 0;
    DtPartition dt_list;
    int current_term = 0;

    bool faulty() const noexcept { return health == CoreHealth::permanent_fault; }
};

enum class NodeRole { follower, primary_leader, secondary_leader };

struct NodeState {
    int id = 0;
    std::vector<CoreState> cores;
    std::optional<int> contact_core;
    NodeRole role = NodeRole::follower;
    std::set<int> group; // leader only

    std::vector<int> enabled_cores() const {
        std::vector<int> out;
        for (const auto& c : cores)
            if (c.enabled) out.push_back(c.core_index);
        return out;
    }

    std::uint64_t executed_tasks() const { return cores.at(0).executed_tasks; }
    std::uint64_t disputes() const { return cores.at(0).dispute_counter; }

    void count_vote(bool disputed) {
        for (auto& c : cores) {
            ++c.executed_tasks;
            if (disputed) ++c.dispute_counter;
        }
    }

    // Appends the identical record to every core's copy of the list.
    void record_dispute(const DisputedEntry& entry) {
        for (auto& c : cores) c.dt_list.push_back(entry);
    }
};

const char* to_string(NodeRole role) noexcept;
const char* to_string(CoreHealth health) noexcept;

// Content hash of a full disputed-task list (all partitions); appended to
// DTList replies as the integrity checksum.
std::uint64_t dtlist_checksum(const std::vector<DtPartition>& partitions) noexcept;

} // namespace ftitmr
