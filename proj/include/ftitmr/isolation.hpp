#pragma once

#include "ftitmr/model.hpp"

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

namespace ftitmr {

enum class CoreVerdict { fault_free, faulty, unresponsive, skipped };

const char* to_string(CoreVerdict verdict) noexcept;

// Outcome of one node's inspection: E is the set of permanently faulty cores,
// A the fault-free ones; unresponsive cores are grouped with E for isolation
// purposes, backoff-skipped cores keep their previous status.
struct IsolationVerdict {
    int node_id = -1;
    std::set<int> faulty;       // E_i
    std::set<int> fault_free;   // A_i
    std::set<int> unresponsive; // no/corrupt diagnostic responses
    std::set<int> skipped;      // under re-check backoff this sweep
    std::vector<DtPartition> cleaned;

    bool all_failed() const noexcept { return fault_free.empty() && skipped.empty(); }
};

// Detection-period schedule: the first sweep runs after `initial` rounds of
// application execution, then the period doubles per completed sweep until it
// reaches `cap`.
struct DetectionSchedule {
    int initial = 2;
    int cap = 100;

    int period = 2;
    int next_round = 2;

    void reset() {
        period = initial;
        next_round = initial;
    }
    bool due(int completed_rounds) const noexcept { return completed_rounds == next_round; }
    void completed_sweep() {
        period = std::min(period * 2, cap);
        next_round += period;
    }
};

// A core that failed a re-check in sweep s with failedCount c is not
// re-checked before sweep s + 2^c.
int core_blocked_until(const DtPartition& partition);

// Entries that passed the triple re-check are removed; failure bookkeeping on
// the remaining ones is kept.
DtPartition without_passed(const DtPartition& partition);

} // namespace ftitmr
