#include "ftitmr/tmr.hpp"

#include "ftitmr/sim.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace ftitmr {

const char* to_string(PolicyKind policy) noexcept {
    switch (policy) {
        case PolicyKind::c_tmr: return "c_tmr";
        case PolicyKind::tp_tmr: return "tp_tmr";
        case PolicyKind::tp_tmr_plus: return "tp_tmr_plus";
        case PolicyKind::r_tmr: return "r_tmr";
        case PolicyKind::fti_tmr: return "fti_tmr";
    }
    return "?";
}

PolicyKind policy_from_string(std::string_view name) {
    if (name == "c_tmr") return PolicyKind::c_tmr;
    if (name == "tp_tmr") return PolicyKind::tp_tmr;
    if (name == "tp_tmr_plus") return PolicyKind::tp_tmr_plus;
    if (name == "r_tmr") return PolicyKind::r_tmr;
    if (name == "fti_tmr") return PolicyKind::fti_tmr;
    throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

std::uint64_t round_input_token(int task_id, int round_index) noexcept {
    return mix_seed(0x696e707574ULL, mix_seed(static_cast<std::uint64_t>(task_id),
                                              static_cast<std::uint64_t>(round_index)));
}

namespace {

int pick_core(const std::vector<SimTime>& free_at, const std::vector<char>& enabled,
              SimTime ready, const std::vector<int>& exclude) {
    int best = -1;
    SimTime best_start = std::numeric_limits<SimTime>::infinity();
    for (std::size_t c = 0; c < free_at.size(); ++c) {
        if (!enabled[c]) continue;
        if (std::find(exclude.begin(), exclude.end(), static_cast<int>(c)) != exclude.end())
            continue;
        const SimTime start = std::max(free_at[c], ready);
        if (start < best_start) {
            best_start = start;
            best = static_cast<int>(c);
        }
    }
    return best;
}

int count_enabled(const std::vector<char>& enabled) {
    int n = 0;
    for (char e : enabled) n += e ? 1 : 0;
    return n;
}

} // namespace

std::array<int, 3> plan_replica_cores(PolicyKind policy, const std::vector<SimTime>& free_at,
                                      const std::vector<char>& enabled, SimTime ready) {
    const int n_en = count_enabled(enabled);
    if (n_en == 0) throw std::invalid_argument("no enabled cores");
    std::array<int, 3> cores{};
    // c_tmr dispatches its three copies in parallel, which lands them on the
    // three earliest-available units; the enhanced policies enforce the same
    // spread as an explicit rule. Plain tp_tmr assigns each copy greedily and
    // may serialize two copies on one core.
    const bool distinct = distinct_core_rule(policy) || policy == PolicyKind::c_tmr;

    std::vector<int> used;
    std::vector<SimTime> load = free_at;

    for (int r = 0; r < 3; ++r) {
        std::vector<int> exclude;
        if (distinct && n_en > static_cast<int>(used.size())) exclude = used;
        const int c = pick_core(load, enabled, ready, exclude);
        assert(c >= 0);
        cores[static_cast<std::size_t>(r)] = c;
        // Occupy the slot so subsequent replicas spread across cores even when
        // the distinct rule is off. Task duration is unknown here; a fixed
        // nudge is enough to order the argmin.
        load[static_cast<std::size_t>(c)] = std::max(load[static_cast<std::size_t>(c)], ready) + 1;
        if (distinct) used.push_back(c);
    }
    return cores;
}

Schedule build_schedule(const Application& app, PolicyKind policy,
                        const std::vector<int>& enabled_cores) {
    if (enabled_cores.empty()) throw std::invalid_argument("enabled core set is empty");
    const int max_core = *std::max_element(enabled_cores.begin(), enabled_cores.end());
    std::vector<char> enabled(static_cast<std::size_t>(max_core) + 1, 0);
    for (int c : enabled_cores) enabled[static_cast<std::size_t>(c)] = 1;
    std::vector<SimTime> free_at(enabled.size(), 0.0);

    // resolve time per task id as scheduling proceeds
    std::unordered_map<int, SimTime> resolved;
    std::unordered_map<int, const Task*> by_id;
    for (const auto& t : app.tasks) by_id[t.id] = &t;

    std::vector<const Task*> order;
    for (int id : topological_order(app)) order.push_back(by_id.at(id));
    if (app.kind == AppKind::dag) {
        // LTF among ready tasks: stable re-sort of the topological order by
        // descending duration, preserving precedence.
        std::vector<const Task*> pending(order.begin(), order.end());
        std::vector<const Task*> ltf;
        std::vector<char> done(pending.size(), 0);
        std::unordered_map<int, std::size_t> pos;
        for (std::size_t i = 0; i < pending.size(); ++i) pos[pending[i]->id] = i;
        auto all_preds_done = [&](const Task* t) {
            for (int p : t->predecessors)
                if (!done[pos.at(p)]) return false;
            return true;
        };
        while (ltf.size() < pending.size()) {
            const Task* best = nullptr;
            for (const Task* t : pending) {
                if (done[pos.at(t->id)] || !all_preds_done(t)) continue;
                if (!best || t->duration_s > best->duration_s ||
                    (t->duration_s == best->duration_s && t->id < best->id))
                    best = t;
            }
            done[pos.at(best->id)] = 1;
            ltf.push_back(best);
        }
        order = std::move(ltf);
    }

    Schedule sched;
    for (const Task* t : order) {
        SimTime ready = 0;
        for (int p : t->predecessors) ready = std::max(ready, resolved[p]);
        if (t->is_dummy()) {
            resolved[t->id] = ready;
            continue;
        }
        const double dur_ms = t->duration_s * 1000.0;
        const auto cores = plan_replica_cores(policy, free_at, enabled, ready);
        SimTime mandatory_end = 0;
        const int replicas = two_phase(policy) ? 2 : 3;
        for (int r = 0; r < replicas; ++r) {
            const int c = cores[static_cast<std::size_t>(r)];
            const SimTime start = std::max(free_at[static_cast<std::size_t>(c)], ready);
            sched.assignments.push_back({t->id, r, c, start});
            free_at[static_cast<std::size_t>(c)] = start + dur_ms;
            mandatory_end = std::max(mandatory_end, start + dur_ms);
        }
        if (two_phase(policy)) {
            // plan the on-demand slot after the mandatory comparison
            const int c = cores[2];
            const SimTime start = std::max(free_at[static_cast<std::size_t>(c)], mandatory_end);
            sched.assignments.push_back({t->id, 2, c, start});
        }
        resolved[t->id] = mandatory_end;
    }
    return sched;
}

VoteOutcome run_task_tmr(PolicyKind policy, const std::array<int, 3>& cores,
                         const std::function<CopyOutcome(int, int)>& run) {
    VoteOutcome out;
    std::array<CopyOutcome, 3> res;
    res[0] = run(0, cores[0]);
    res[1] = run(1, cores[1]);
    out.copies_executed = 2;

    if (two_phase(policy) && res[0].token == res[1].token) {
        out.value = res[0].token;
        out.failed_copies = (res[0].correct ? 0 : 1) + (res[1].correct ? 0 : 1);
        return out;
    }

    res[2] = run(2, cores[2]);
    out.copies_executed = 3;
    out.disputed = !(res[0].token == res[1].token && res[1].token == res[2].token);
    for (int i = 0; i < 3; ++i)
        if (!res[static_cast<std::size_t>(i)].correct) ++out.failed_copies;

    if (res[0].token == res[1].token || res[0].token == res[2].token) {
        out.value = res[0].token;
    } else if (res[1].token == res[2].token) {
        out.value = res[1].token;
    } else {
        out.system_failure = true;
    }
    return out;
}

std::optional<int> RtmrDetector::observe(const std::vector<std::pair<int, bool>>& copy_lost,
                                         const NodeState& node, Rng& stream) {
    int fire_core = -1;
    for (const auto& [core, lost] : copy_lost) {
        int& s = streak_[static_cast<std::size_t>(core)];
        if (lost) {
            if (++s >= threshold_ && fire_core < 0) fire_core = core;
        } else {
            s = 0;
        }
    }
    if (fire_core < 0) return std::nullopt;
    streak_[static_cast<std::size_t>(fire_core)] = 0;

    if (!broken_) return fire_core;
    if (fired_broken_) return std::nullopt;
    // Broken detection unit: the disable order hits a random healthy core and
    // the unit never fires again.
    std::vector<int> healthy;
    for (const auto& c : node.cores)
        if (c.enabled && !c.faulty()) healthy.push_back(c.core_index);
    fired_broken_ = true;
    if (healthy.empty()) return std::nullopt;
    return healthy[stream.below(healthy.size())];
}

namespace {

struct PendingTask {
    const Task* task;
    int unresolved;
    SimTime ready = 0;
    std::size_t input_pos; // FCFS order
};

} // namespace

RoundResult run_round(NodeState& node, const Application& app, PolicyKind policy,
                      FaultModel& faults, Rng& fault_stream, int round_index,
                      RtmrDetector* detector, Rng* detector_stream) {
    RoundResult result;
    TraceHasher digest;
    digest.ingest(static_cast<std::uint64_t>(node.id));
    digest.ingest(static_cast<std::uint64_t>(round_index));

    std::vector<char> enabled(node.cores.size(), 0);
    std::vector<SimTime> free_at(node.cores.size(), 0.0);
    int n_enabled = 0;
    for (const auto& c : node.cores) {
        enabled[static_cast<std::size_t>(c.core_index)] = c.enabled ? 1 : 0;
        n_enabled += c.enabled ? 1 : 0;
    }
    if (n_enabled == 0) {
        // Nothing can execute; the application run fails outright.
        result.failed = true;
        result.digest = digest.value();
        return result;
    }

    std::unordered_map<int, std::size_t> pos;
    std::vector<PendingTask> tasks;
    tasks.reserve(app.tasks.size());
    for (std::size_t i = 0; i < app.tasks.size(); ++i) {
        pos[app.tasks[i].id] = i;
        tasks.push_back({&app.tasks[i], static_cast<int>(app.tasks[i].predecessors.size()), 0.0, i});
    }
    std::vector<std::vector<std::size_t>> succs(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i)
        for (int p : tasks[i].task->predecessors) succs[pos.at(p)].push_back(i);

    std::vector<std::size_t> ready_pool;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].unresolved == 0) ready_pool.push_back(i);

    std::size_t remaining = tasks.size();
    SimTime cursor = 0;

    auto resolve = [&](std::size_t idx, SimTime at) {
        for (std::size_t s : succs[idx]) {
            tasks[s].ready = std::max(tasks[s].ready, at);
            if (--tasks[s].unresolved == 0) ready_pool.push_back(s);
        }
    };

    while (remaining > 0) {
        // pick the dispatch candidate among tasks ready at the cursor
        std::size_t chosen = tasks.size();
        for (std::size_t idx : ready_pool) {
            if (tasks[idx].ready > cursor) continue;
            if (chosen == tasks.size()) {
                chosen = idx;
                continue;
            }
            const Task* a = tasks[idx].task;
            const Task* b = tasks[chosen].task;
            if (app.kind == AppKind::dag) {
                if (a->duration_s > b->duration_s ||
                    (a->duration_s == b->duration_s && a->id < b->id))
                    chosen = idx;
            } else {
                if (tasks[idx].input_pos < tasks[chosen].input_pos) chosen = idx;
            }
        }
        if (chosen == tasks.size()) {
            SimTime next = std::numeric_limits<SimTime>::infinity();
            for (std::size_t idx : ready_pool) next = std::min(next, tasks[idx].ready);
            assert(next < std::numeric_limits<SimTime>::infinity());
            cursor = next;
            continue;
        }
        ready_pool.erase(std::find(ready_pool.begin(), ready_pool.end(), chosen));
        --remaining;

        const Task& task = *tasks[chosen].task;
        const SimTime ready = std::max(tasks[chosen].ready, cursor);
        if (task.is_dummy()) {
            resolve(chosen, ready);
            continue;
        }

        const double dur_ms = task.duration_s * 1000.0;
        const std::uint64_t input = round_input_token(task.id, round_index);
        const auto cores = plan_replica_cores(policy, free_at, enabled, ready);

        SimTime mandatory_end = 0;
        SimTime task_end = 0;
        std::array<std::uint64_t, 3> tokens{};
        auto exec_copy = [&](int replica, int core) {
            // the on-demand copy starts only after the mandatory comparison
            const SimTime earliest =
                (replica == 2 && two_phase(policy)) ? std::max(ready, mandatory_end) : ready;
            const SimTime start = std::max(free_at[static_cast<std::size_t>(core)], earliest);
            const SimTime end = start + dur_ms;
            free_at[static_cast<std::size_t>(core)] = end;
            if (replica < 2 || !two_phase(policy))
                mandatory_end = std::max(mandatory_end, end);
            task_end = std::max(task_end, end);
            const CopyOutcome oc = faults.sample_copy_outcome(
                node.cores[static_cast<std::size_t>(core)], task, input, fault_stream);
            tokens[static_cast<std::size_t>(replica)] = oc.token;
            if (replica < 2 || !two_phase(policy))
                ++result.mandatory_copies;
            else
                ++result.on_demand_copies;
            return oc;
        };

        const VoteOutcome vote = run_task_tmr(policy, cores, exec_copy);
        ++result.votes;
        result.failed |= vote.failed_copies >= 2;
        if (vote.system_failure) ++result.system_failures;

        node.count_vote(vote.disputed);
        if (vote.disputed) {
            ++result.disputes;
            node.record_dispute(DisputedEntry{task.id, input, false, 0, -1});
        }

        digest.ingest(static_cast<std::uint64_t>(task.id));
        digest.ingest(vote.system_failure ? 0xdead : vote.value);
        digest.ingest(static_cast<std::uint64_t>(vote.copies_executed));

        // history-based detection (R-TMR only): losses are attributable only
        // when the vote produced a majority value
        if (detector && detector_stream && !vote.system_failure) {
            std::vector<std::pair<int, bool>> copy_lost;
            for (int r = 0; r < vote.copies_executed; ++r)
                copy_lost.emplace_back(cores[static_cast<std::size_t>(r)],
                                       tokens[static_cast<std::size_t>(r)] != vote.value);
            if (auto disable = detector->observe(copy_lost, node, *detector_stream)) {
                auto& core = node.cores[static_cast<std::size_t>(*disable)];
                if (core.enabled && n_enabled > 1) {
                    core.enabled = false;
                    enabled[static_cast<std::size_t>(*disable)] = 0;
                    --n_enabled;
                    ++result.disables;
                    result.migrations += remaining;
                    digest.ingest(0xd15ab1e);
                    digest.ingest(static_cast<std::uint64_t>(*disable));
                }
            }
        }

        resolve(chosen, task_end);
        result.makespan_ms = std::max(result.makespan_ms, task_end);
    }

    result.digest = digest.value();
    return result;
}

} // namespace ftitmr
