#pragma once

#include "ftitmr/model.hpp"
#include "ftitmr/rng.hpp"
#include "ftitmr/workload.hpp"

#include <cstdint>
#include <map>
#include <set>

namespace ftitmr {

// Transient-fault rate model: faults follow a Poisson process whose rate
// depends on the voltage/frequency level,
//   lambda = lambda0 * 10^(d * (1 - s_level) / (1 - s_min)).
struct TransientFaultConfig {
    double lambda0 = 1e-6;        // faults/second at the maximum level
    double d = 3.0;               // technology constant
    double s_level = 1.45 / 1.55; // operating voltage/frequency level
    double s_min = 0.85 / 1.55;   // minimum level

    void validate() const;
};

struct PermanentFaultConfig {
    std::map<int, std::set<int>> faulty_cores; // node id -> core indices
    double correct_result_prob = 0.0;          // epsilon: faulty core still correct
    double accident_prob = 0.5;                // per protocol interaction

    void validate() const;
};

double transient_rate(const TransientFaultConfig& cfg);

// Probability that a task of duration T seconds hits at least one transient
// fault: F = 1 - exp(-lambda * T). Exactly 0 for T = 0.
double transient_fault_prob(double lambda, double task_seconds);

enum class AccidentKind { none, crash, timeout, stale_term, corrupt_payload };

const char* to_string(AccidentKind kind) noexcept;

struct CopyOutcome {
    bool correct = true;
    std::uint64_t token = 0;
};

// Mints result tokens. Correct copies of the same (task, round) share one
// token; every corrupted copy gets a globally unique wrong token so that
// independent corruptions can never agree in a vote.
class TokenMint {
public:
    static std::uint64_t correct_token(int task_id, std::uint64_t context) noexcept {
        std::uint64_t s = mix_seed(0x7061737365640000ULL | static_cast<std::uint64_t>(task_id),
                                   context);
        return (1ULL << 63) | s;
    }
    std::uint64_t wrong_token() noexcept { return ++counter_; }
    std::uint64_t minted_wrong() const noexcept { return counter_; }

private:
    std::uint64_t counter_ = 0; // wrong tokens stay below 2^63
};

// All corruption decisions in a run flow through one FaultModel so token
// uniqueness and stream usage stay auditable.
class FaultModel {
public:
    FaultModel(const TransientFaultConfig& transient, const PermanentFaultConfig& permanent)
        : permanent_(permanent), lambda_(transient_rate(transient)) {}

    double lambda() const noexcept { return lambda_; }
    double copy_fault_prob(double task_seconds) const {
        return transient_fault_prob(lambda_, task_seconds);
    }

    // Executes one copy of `task` on `core` in `context` (a per-(task,round)
    // tag): permanently faulty cores return the correct token only with
    // probability epsilon; healthy cores corrupt with probability F.
    CopyOutcome sample_copy_outcome(const CoreState& core, const Task& task,
                                    std::uint64_t context, Rng& stream);

    // Accidental behavior of a permanently faulty core at one protocol
    // interaction. Healthy cores never take accidents.
    AccidentKind sample_accident(const CoreState& core, Rng& stream) const;

    TokenMint& mint() noexcept { return mint_; }
    const PermanentFaultConfig& permanent() const noexcept { return permanent_; }

private:
    PermanentFaultConfig permanent_;
    double lambda_;
    TokenMint mint_;
};

} // namespace ftitmr
