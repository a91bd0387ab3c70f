#include "ftitmr/sim.hpp"

namespace ftitmr {

std::size_t Kernel::run(SimTime cap) {
    std::size_t processed = 0;
    while (!queue_.empty() && queue_.top().at <= cap) {
        Entry e = queue_.top();
        queue_.pop();
        now_ = e.at;
        trace_.ingest_time(e.at);
        trace_.ingest(fnv1a(e.meta.label));
        trace_.ingest(static_cast<std::uint64_t>(e.meta.a));
        trace_.ingest(static_cast<std::uint64_t>(e.meta.b));
        trace_.ingest(static_cast<std::uint64_t>(e.meta.c));
        if (on_event) on_event(e.at, e.meta);
        e.fn();
        ++processed;
    }
    if (queue_.empty() && now_ < cap && cap < 1e300) now_ = cap;
    return processed;
}

void Kernel::reset_to(SimTime t) {
    while (!queue_.empty()) queue_.pop();
    if (t > now_) now_ = t;
}

} // namespace ftitmr
