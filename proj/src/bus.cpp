#include "ftitmr/bus.hpp"

namespace ftitmr {

const char* payload_name(const Payload& p) noexcept {
    struct Namer {
        const char* operator()(const SsReportBody&) const { return "ss_report"; }
        const char* operator()(const VoteRequestBody&) const { return "vote_request"; }
        const char* operator()(const VoteBody&) const { return "vote"; }
        const char* operator()(const LeaderClaimBody&) const { return "leader_claim"; }
        const char* operator()(const AckBody&) const { return "ack"; }
        const char* operator()(const HeartbeatBody&) const { return "heartbeat"; }
        const char* operator()(const DtListRequestBody&) const { return "dtlist_request"; }
        const char* operator()(const DtListReplyBody&) const { return "dtlist_reply"; }
        const char* operator()(const ExecOrderBody&) const { return "exec_order"; }
        const char* operator()(const VerdictOrderBody&) const { return "verdict_order"; }
        const char* operator()(const AlertBody&) const { return "alert"; }
    };
    return std::visit(Namer{}, p);
}

const char* to_string(NodeRole role) noexcept {
    switch (role) {
        case NodeRole::follower: return "follower";
        case NodeRole::primary_leader: return "primary";
        case NodeRole::secondary_leader: return "secondary";
    }
    return "?";
}

const char* to_string(CoreHealth health) noexcept {
    return health == CoreHealth::healthy ? "healthy" : "permanent_fault";
}

std::uint64_t dtlist_checksum(const std::vector<DtPartition>& partitions) noexcept {
    TraceHasher h;
    h.ingest(partitions.size());
    for (const auto& part : partitions) {
        h.ingest(part.size());
        for (const auto& e : part) {
            h.ingest(static_cast<std::uint64_t>(e.task_id));
            h.ingest(e.input_token);
            h.ingest(static_cast<std::uint64_t>(e.failed_count));
            h.ingest(static_cast<std::uint64_t>(e.failed_sweep));
        }
    }
    return h.value();
}

void Bus::dispatch(Message m) {
    const auto src_key = std::make_pair(m.src.node, m.src.core);
    m.sender_seq = ++sender_seq_[src_key];
    SimTime& ready = sender_ready_[src_key];
    const SimTime depart = std::max(kernel_.now(), ready);
    ready = depart; // later sends cannot depart earlier
    const SimTime arrive = depart + latency_;
    ++sent_;

    EventMeta meta{payload_name(m.body), m.src.node * 16 + m.src.core,
                   m.dst.node * 16 + (m.dst.core & 0xf), m.term};
    kernel_.schedule(arrive, meta, [this, m]() {
        const auto key = std::make_pair(std::make_pair(m.src.node, m.src.core), m.dst.node);
        auto it = last_delivered_.find(key);
        if (it != last_delivered_.end() && m.sender_seq <= it->second) ++fifo_violations_;
        last_delivered_[key] = m.sender_seq;
        ++delivered_;
        if (deliver_) deliver_(m);
    });
}

void Bus::send(Message m) { dispatch(std::move(m)); }

void Bus::broadcast(Message m, int n_nodes) {
    for (int node = 0; node < n_nodes; ++node) {
        Message copy = m;
        copy.dst = CoreAddr{node, kContactCore};
        dispatch(std::move(copy));
    }
}

void Bus::hold_sender(CoreAddr src, SimTime until) {
    SimTime& ready = sender_ready_[{src.node, src.core}];
    if (until > ready) ready = until;
}

} // namespace ftitmr
