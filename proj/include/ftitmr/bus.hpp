#pragma once

#include "ftitmr/messages.hpp"
#include "ftitmr/sim.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <utility>

namespace ftitmr {

// Reliable simulated interconnect: every accepted message is delivered exactly
// once, unmodified, after a fixed latency, in per-sender order. Loss only
// happens at the sender (a crashed faulty core never calls send), and sender
// timeouts push the whole outbound stream back so FIFO order is preserved.
class Bus {
public:
    using Deliver = std::function<void(const Message&)>;

    Bus(Kernel& kernel, SimTime latency_ms) : kernel_(kernel), latency_(latency_ms) {}

    void set_deliver(Deliver d) { deliver_ = std::move(d); }

    void send(Message m);

    // Fan-out: one delivery per node in [0, n_nodes), addressed to the
    // receiving node's contact core. Includes the sender's own node.
    void broadcast(Message m, int n_nodes);

    // Models a "timing out" sender: all of this core's subsequent messages
    // leave no earlier than `until`.
    void hold_sender(CoreAddr src, SimTime until);

    std::uint64_t sent() const noexcept { return sent_; }
    std::uint64_t delivered() const noexcept { return delivered_; }
    std::uint64_t fifo_violations() const noexcept { return fifo_violations_; }
    SimTime latency() const noexcept { return latency_; }

private:
    void dispatch(Message m);

    Kernel& kernel_;
    SimTime latency_;
    Deliver deliver_;
    std::map<std::pair<int, int>, SimTime> sender_ready_;
    std::map<std::pair<int, int>, std::uint64_t> sender_seq_;
    // per (sender core, receiver node): last delivered seq, for the FIFO audit
    std::map<std::pair<std::pair<int, int>, int>, std::uint64_t> last_delivered_;
    std::uint64_t sent_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t fifo_violations_ = 0;
};

} // namespace ftitmr
