#include "ftitmr/isolation.hpp"

namespace ftitmr {

const char* to_string(CoreVerdict verdict) noexcept {
    switch (verdict) {
        case CoreVerdict::fault_free: return "fault_free";
        case CoreVerdict::faulty: return "faulty";
        case CoreVerdict::unresponsive: return "unresponsive";
        case CoreVerdict::skipped: return "skipped";
    }
    return "?";
}

int core_blocked_until(const DtPartition& partition) {
    int blocked = 0;
    for (const auto& e : partition) {
        if (e.failed_count <= 0 || e.failed_sweep < 0) continue;
        const int window = e.failed_count >= 30 ? (1 << 30) : (1 << e.failed_count);
        blocked = std::max(blocked, e.failed_sweep + window);
    }
    return blocked;
}

DtPartition without_passed(const DtPartition& partition) {
    DtPartition out;
    out.reserve(partition.size());
    for (const auto& e : partition)
        if (!e.passed) out.push_back(e);
    return out;
}

} // namespace ftitmr
