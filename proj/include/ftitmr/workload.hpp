#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ftitmr {

// One task of an application. Duration is in simulated seconds; STG dummy
// entry/exit nodes keep duration 0 and are excluded from executed-task
// accounting.
struct Task {
    int id = 0;
    double duration_s = 0.0;
    std::vector<int> predecessors;

    bool is_dummy() const noexcept { return duration_s <= 0.0; }
};

enum class AppKind { dag, independent };

struct Application {
    std::string name;
    AppKind kind = AppKind::dag;
    std::vector<Task> tasks;

    // Tasks that actually execute (dummies carry precedence only).
    std::size_t real_task_count() const noexcept;
    const Task& task_by_id(int id) const;
};

const char* to_string(AppKind kind) noexcept;

class StgParseError : public std::runtime_error {
public:
    StgParseError(int line, const std::string& what)
        : std::runtime_error("stg parse error at line " + std::to_string(line) + ": " + what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Parses the STG text convention: first non-comment line is the task count,
// then one line per task: `index processing_time pred_count pred...`.
// Lines starting with '#' and trailing blank lines are ignored.
Application parse_stg(std::string_view text, std::string_view name = "stg");

// Inverse of parse_stg on the retained fields.
std::string serialize_stg(const Application& app);

// `count` independent tasks with durations drawn uniformly from
// [duration_lo, duration_hi] seconds. Pure function of its arguments.
Application generate_random_app(int count, double duration_lo, double duration_hi,
                                std::uint64_t seed);

// Returns task ids in a valid topological order; throws StgParseError
// (line of the offending task) if the precedence relation has a cycle.
std::vector<int> topological_order(const Application& app);

// Checks the Application invariants (unique ids, resolvable predecessors,
// acyclic, independent => no predecessors); throws std::invalid_argument.
void validate(const Application& app);

} // namespace ftitmr
