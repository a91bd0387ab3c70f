#include "ftitmr/election.hpp"

#include <stdexcept>

namespace ftitmr {

double compute_ss(std::uint64_t s_total, std::uint64_t disputes, double f_actual, double f_max) {
    if (disputes > s_total) throw std::invalid_argument("disputes exceed executed tasks");
    if (f_actual < 0 || f_max < 0 || f_actual > f_max)
        throw std::invalid_argument("need 0 <= f_actual <= f_max");
    const double denom = static_cast<double>(s_total) + f_max;
    if (denom == 0) return 1.0; // fresh node: no evidence of instability
    return (static_cast<double>(s_total) - static_cast<double>(disputes) + f_actual) / denom;
}

CandidateEntry validate_report(const StabilityReport& r, int local_term) {
    CandidateEntry rejected{r.node_id, -1.0};
    if (r.term != local_term) return rejected;
    if (r.disputes > r.s_total) return rejected;
    if (r.f_actual < 0 || r.f_max < 0 || r.f_actual > r.f_max) return rejected;
    const double recomputed = compute_ss(r.s_total, r.disputes, r.f_actual, r.f_max);
    if (recomputed != r.ss) return rejected;
    if (r.ss < 0.0 || r.ss > 1.0) return rejected;
    return CandidateEntry{r.node_id, r.ss};
}

} // namespace ftitmr
