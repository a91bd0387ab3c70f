#include "ftitmr/workload.hpp"

#include "ftitmr/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ftitmr {

std::size_t Application::real_task_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tasks)
        if (!t.is_dummy()) ++n;
    return n;
}

const Task& Application::task_by_id(int id) const {
    for (const auto& t : tasks)
        if (t.id == id) return t;
    throw std::out_of_range("no task with id " + std::to_string(id));
}

const char* to_string(AppKind kind) noexcept {
    return kind == AppKind::dag ? "dag" : "independent";
}

namespace {

struct TokenLine {
    int line_no;
    std::vector<std::string> tokens;
};

std::vector<TokenLine> tokenize(std::string_view text) {
    std::vector<TokenLine> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;

        std::string_view trimmed = line;
        while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t' ||
                                    trimmed.front() == '\r'))
            trimmed.remove_prefix(1);
        if (trimmed.empty() || trimmed.front() == '#') continue;

        TokenLine tl{line_no, {}};
        std::istringstream iss{std::string(line)};
        std::string tok;
        while (iss >> tok) {
            if (tok.front() == '#') break; // trailing comment
            tl.tokens.push_back(tok);
        }
        if (!tl.tokens.empty()) out.push_back(std::move(tl));
    }
    return out;
}

long long parse_int(const std::string& tok, int line) {
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw StgParseError(line, "expected integer, got '" + tok + "'");
    return v;
}

double parse_num(const std::string& tok, int line) {
    try {
        std::size_t idx = 0;
        double v = std::stod(tok, &idx);
        if (idx != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw StgParseError(line, "expected number, got '" + tok + "'");
    }
}

} // namespace

Application parse_stg(std::string_view text, std::string_view name) {
    const auto lines = tokenize(text);
    if (lines.empty()) throw StgParseError(1, "empty file");

    const auto& head = lines.front();
    if (head.tokens.size() != 1)
        throw StgParseError(head.line_no, "header must be a single task count");
    const long long declared = parse_int(head.tokens[0], head.line_no);
    if (declared <= 0) throw StgParseError(head.line_no, "task count must be positive");
    if (static_cast<long long>(lines.size()) - 1 != declared)
        throw StgParseError(head.line_no,
                            "declared " + std::to_string(declared) + " tasks but file has " +
                                std::to_string(lines.size() - 1) + " task lines");

    Application app;
    app.name = std::string(name);
    app.kind = AppKind::dag;
    std::unordered_map<int, int> line_of_task;
    std::unordered_set<int> seen;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& tl = lines[i];
        if (tl.tokens.size() < 3)
            throw StgParseError(tl.line_no, "task line needs index, time and predecessor count");
        Task t;
        const long long id = parse_int(tl.tokens[0], tl.line_no);
        if (id < 0) throw StgParseError(tl.line_no, "task index must be non-negative");
        t.id = static_cast<int>(id);
        t.duration_s = parse_num(tl.tokens[1], tl.line_no);
        if (t.duration_s < 0)
            throw StgParseError(tl.line_no, "processing time must be non-negative");
        const long long npred = parse_int(tl.tokens[2], tl.line_no);
        if (npred < 0 || tl.tokens.size() != static_cast<std::size_t>(3 + npred))
            throw StgParseError(tl.line_no, "predecessor count does not match list length");
        for (long long k = 0; k < npred; ++k)
            t.predecessors.push_back(
                static_cast<int>(parse_int(tl.tokens[3 + static_cast<std::size_t>(k)], tl.line_no)));
        std::sort(t.predecessors.begin(), t.predecessors.end());
        t.predecessors.erase(std::unique(t.predecessors.begin(), t.predecessors.end()),
                             t.predecessors.end());

        if (!seen.insert(t.id).second)
            throw StgParseError(tl.line_no, "duplicate task id " + std::to_string(t.id));
        line_of_task[t.id] = tl.line_no;
        app.tasks.push_back(std::move(t));
    }

    for (const auto& t : app.tasks)
        for (int p : t.predecessors)
            if (!seen.count(p))
                throw StgParseError(line_of_task[t.id],
                                    "task " + std::to_string(t.id) + " references absent predecessor " +
                                        std::to_string(p));

    // Cycle check; topological_order reports the line via the throw below.
    try {
        topological_order(app);
    } catch (const StgParseError& e) {
        throw StgParseError(line_of_task.count(e.line()) ? line_of_task[e.line()] : e.line(),
                            "cycle detected involving task " + std::to_string(e.line()));
    }
    return app;
}

std::string serialize_stg(const Application& app) {
    std::string out;
    out += std::to_string(app.tasks.size());
    out += '\n';
    char buf[64];
    for (const auto& t : app.tasks) {
        out += std::to_string(t.id);
        out += ' ';
        if (t.duration_s == static_cast<long long>(t.duration_s)) {
            out += std::to_string(static_cast<long long>(t.duration_s));
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", t.duration_s);
            out += buf;
        }
        out += ' ';
        out += std::to_string(t.predecessors.size());
        for (int p : t.predecessors) {
            out += ' ';
            out += std::to_string(p);
        }
        out += '\n';
    }
    return out;
}

Application generate_random_app(int count, double duration_lo, double duration_hi,
                                std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("task count must be >= 1");
    if (!(duration_lo > 0) || duration_lo > duration_hi)
        throw std::invalid_argument("need 0 < duration_lo <= duration_hi");
    Rng rng = Rng(seed).fork("random-app");
    Application app;
    app.name = "random" + std::to_string(count);
    app.kind = AppKind::independent;
    app.tasks.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Task t;
        t.id = i;
        t.duration_s = duration_lo == duration_hi ? duration_lo
                                                  : rng.uniform(duration_lo, duration_hi);
        app.tasks.push_back(std::move(t));
    }
    return app;
}

std::vector<int> topological_order(const Application& app) {
    std::unordered_map<int, std::size_t> index_of;
    for (std::size_t i = 0; i < app.tasks.size(); ++i) index_of[app.tasks[i].id] = i;

    std::vector<int> indeg(app.tasks.size(), 0);
    std::vector<std::vector<std::size_t>> succs(app.tasks.size());
    for (std::size_t i = 0; i < app.tasks.size(); ++i) {
        for (int p : app.tasks[i].predecessors) {
            auto it = index_of.find(p);
            if (it == index_of.end())
                throw std::invalid_argument("dangling predecessor " + std::to_string(p));
            succs[it->second].push_back(i);
            ++indeg[i];
        }
    }

    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < app.tasks.size(); ++i)
        if (indeg[i] == 0) ready.push_back(i);

    std::vector<int> order;
    order.reserve(app.tasks.size());
    while (!ready.empty()) {
        const std::size_t i = ready.front();
        ready.pop_front();
        order.push_back(app.tasks[i].id);
        for (std::size_t s : succs[i])
            if (--indeg[s] == 0) ready.push_back(s);
    }
    if (order.size() != app.tasks.size()) {
        for (std::size_t i = 0; i < app.tasks.size(); ++i)
            if (indeg[i] > 0) throw StgParseError(app.tasks[i].id, "cycle");
        throw StgParseError(0, "cycle");
    }
    return order;
}

void validate(const Application& app) {
    std::unordered_set<int> ids;
    for (const auto& t : app.tasks) {
        if (!ids.insert(t.id).second)
            throw std::invalid_argument("duplicate task id " + std::to_string(t.id));
        if (app.kind == AppKind::independent && !t.predecessors.empty())
            throw std::invalid_argument("independent application with predecessors on task " +
                                        std::to_string(t.id));
    }
    for (const auto& t : app.tasks)
        for (int p : t.predecessors)
            if (!ids.count(p))
                throw std::invalid_argument("dangling predecessor " + std::to_string(p));
    topological_order(app); // throws on cycle
}

} // namespace ftitmr
