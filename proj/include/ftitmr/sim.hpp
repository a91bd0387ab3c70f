#pragma once

#include "ftitmr/rng.hpp"

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftitmr {

// Simulated time in milliseconds.
using SimTime = double;

// FNV-1a accumulator over the processed event stream; equal hashes across two
// runs certify identical traces.
class TraceHasher {
public:
    void ingest(std::uint64_t v) noexcept {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (v >> (i * 8)) & 0xff;
            hash_ *= 0x100000001b3ULL;
        }
    }
    void ingest_time(SimTime t) noexcept {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof t);
        __builtin_memcpy(&bits, &t, sizeof bits);
        ingest(bits);
    }
    std::uint64_t value() const noexcept { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

struct EventMeta {
    const char* label = ""; // static string; hashed into the trace
    std::int64_t a = 0;     // src / node id
    std::int64_t b = 0;     // dst / core id
    std::int64_t c = 0;     // term or payload tag
};

// Deterministic single-threaded discrete-event kernel. Ties at equal times
// are broken by insertion sequence number.
class Kernel {
public:
    using Handler = std::function<void()>;

    SimTime now() const noexcept { return now_; }

    std::uint64_t schedule(SimTime at, EventMeta meta, Handler fn) {
        if (at < now_) throw std::invalid_argument("schedule in the past");
        const std::uint64_t id = next_seq_++;
        queue_.push(Entry{at, id, meta, std::move(fn)});
        return id;
    }

    bool empty() const noexcept { return queue_.empty(); }

    // Processes events until the queue drains or `cap` is passed; returns the
    // number of events processed. Events scheduled at t > cap stay queued.
    std::size_t run(SimTime cap = 1e300);

    // Optional per-event logging hook (verbose traces).
    std::function<void(SimTime, const EventMeta&)> on_event;

    TraceHasher& trace() noexcept { return trace_; }

    // Drops all pending events and moves the clock; used between independent
    // protocol phases so stale timers cannot leak across rounds.
    void reset_to(SimTime t);

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        EventMeta meta;
        Handler fn;
    };
    struct Later {
        bool operator()(const Entry& x, const Entry& y) const noexcept {
            if (x.at != y.at) return x.at > y.at;
            return x.seq > y.seq;
        }
    };

    SimTime now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    TraceHasher trace_;
};

} // namespace ftitmr
