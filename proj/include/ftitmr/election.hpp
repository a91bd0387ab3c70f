#pragma once

#include "ftitmr/messages.hpp"
#include "ftitmr/sim.hpp"

#include <cstdint>

namespace ftitmr {

// Stability score of a node: SS = (S - D + f) / (S + F), in [0,1], higher is
// more stable. A fresh node (S = F = 0) scores 1.
double compute_ss(std::uint64_t s_total, std::uint64_t disputes, double f_actual, double f_max);

struct StabilityReport {
    int node_id = -1;
    int term = 0;
    std::uint64_t s_total = 0;
    std::uint64_t disputes = 0;
    double f_actual = 0.0;
    double f_max = 0.0;
    double ss = 0.0;
};

// Election candidate key. Ordering is by descending stability score with the
// lower node id winning ties, so equal scores cannot scramble the vote.
struct CandidateEntry {
    int node_id = -1;
    double ss_key = -1.0; // -1 marks a rejected report

    bool preferred_over(const CandidateEntry& other) const noexcept {
        if (ss_key != other.ss_key) return ss_key > other.ss_key;
        return node_id < other.node_id;
    }
};

// Checks a received report: the term must match, the claimed score must
// recompute exactly from the attached parameters and lie in [0,1]. Anything
// else yields key -1, and the sender's votes and claims are rejected for the
// rest of the term.
CandidateEntry validate_report(const StabilityReport& r, int local_term);

struct ElectionConfig {
    SimTime delay_lo_ms = 150; // pre-broadcast random delay
    SimTime delay_hi_ms = 300;
    SimTime ss_exchange_ms = 500;
    SimTime vote_phase_ms = 500;
    SimTime ack_phase_ms = 500;
    SimTime heartbeat_interval_ms = 100;
    SimTime heartbeat_timeout_ms = 400;
    SimTime reply_timeout_ms = 50;     // diagnostic order round trip
    SimTime accident_hold_ms = 1000;   // how long a "timeout" accident stalls a sender
    int max_election_restarts = 50;
    SimTime detection_round_cap_ms = 240000; // hard stop for one detection round

    SimTime election_attempt_ms() const noexcept {
        return ss_exchange_ms + 2 * (vote_phase_ms + ack_phase_ms);
    }
};

} // namespace ftitmr
