#include "ftitmr/fault_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ftitmr {

void TransientFaultConfig::validate() const {
    if (!(lambda0 > 0)) throw std::invalid_argument("lambda0 must be positive");
    if (!(d >= 0)) throw std::invalid_argument("d must be non-negative");
    if (!(s_min > 0) || s_min > s_level || s_level > 1.0)
        throw std::invalid_argument("need 0 < s_min <= s_level <= 1");
    if (s_min == 1.0 && s_level != 1.0)
        throw std::invalid_argument("s_min = 1 makes the exponent undefined");
}

void PermanentFaultConfig::validate() const {
    if (correct_result_prob < 0 || correct_result_prob > 1)
        throw std::invalid_argument("correct_result_prob must be in [0,1]");
    if (accident_prob < 0 || accident_prob > 1)
        throw std::invalid_argument("accident_prob must be in [0,1]");
    for (const auto& [node, cores] : faulty_cores) {
        if (node < 0) throw std::invalid_argument("faulty_cores: negative node id");
        for (int c : cores)
            if (c < 0) throw std::invalid_argument("faulty_cores: negative core index");
    }
}

double transient_rate(const TransientFaultConfig& cfg) {
    cfg.validate();
    if (cfg.s_level == 1.0) return cfg.lambda0; // exponent is exactly zero
    const double exponent = cfg.d * (1.0 - cfg.s_level) / (1.0 - cfg.s_min);
    return cfg.lambda0 * std::pow(10.0, exponent);
}

double transient_fault_prob(double lambda, double task_seconds) {
    if (lambda < 0 || task_seconds < 0)
        throw std::invalid_argument("transient_fault_prob needs lambda >= 0 and T >= 0");
    return -std::expm1(-lambda * task_seconds);
}

const char* to_string(AccidentKind kind) noexcept {
    switch (kind) {
        case AccidentKind::none: return "none";
        case AccidentKind::crash: return "crash";
        case AccidentKind::timeout: return "timeout";
        case AccidentKind::stale_term: return "stale_term";
        case AccidentKind::corrupt_payload: return "corrupt_payload";
    }
    return "?";
}

CopyOutcome FaultModel::sample_copy_outcome(const CoreState& core, const Task& task,
                                            std::uint64_t context, Rng& stream) {
    const std::uint64_t correct = TokenMint::correct_token(task.id, context);
    if (core.faulty()) {
        if (stream.bernoulli(permanent_.correct_result_prob)) return {true, correct};
        return {false, mint_.wrong_token()};
    }
    const double f = copy_fault_prob(task.duration_s);
    if (f > 0 && stream.bernoulli(f)) return {false, mint_.wrong_token()};
    return {true, correct};
}

AccidentKind FaultModel::sample_accident(const CoreState& core, Rng& stream) const {
    if (!core.faulty()) return AccidentKind::none;
    if (!stream.bernoulli(permanent_.accident_prob)) return AccidentKind::none;
    switch (stream.below(4)) {
        case 0: return AccidentKind::crash;
        case 1: return AccidentKind::timeout;
        case 2: return AccidentKind::stale_term;
        default: return AccidentKind::corrupt_payload;
    }
}

} // namespace ftitmr
