// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace egrpo {

struct SearchAction {
    std::vector<std::string> queries;
    bool operator==(const SearchAction&) const = default;
};

struct VisitAction {
    std::vector<std::string> urls;
    std::string goal;
    bool operator==(const VisitAction&) const = default;
};

struct AnswerAction {
    std::string answer;
    bool operator==(const AnswerAction&) const = default;
};

// A tool the caller's agent knows about but we do not. Only produced when
// parsing with ToolPolicy::PassThrough; `arguments_json` is the compact dump.
struct OtherToolAction {
    std::string name;
    std::string arguments_json;
    bool operator==(const OtherToolAction&) const = default;
};

using Action = std::variant<SearchAction, VisitAction, AnswerAction, OtherToolAction>;

bool is_answer(const Action& action) noexcept;
bool is_tool_call(const Action& action) noexcept;

/// One ReAct iteration: thought, action and (for tool calls) the observation.
struct Step {
    std::string thought;
    Action action;
    std::optional<std::string> observation;
    bool operator==(const Step&) const = default;
};

enum class RolloutStatus { Ok, FormatError, Overlength };
enum class Verdict { Correct, Wrong };

std::string_view to_string(RolloutStatus status) noexcept;
std::string_view to_string(Verdict verdict) noexcept;

struct Rollout {
    std::vector<Step> steps;
    RolloutStatus status = RolloutStatus::Ok;
    std::optional<Verdict> verdict;
    // Number of sampled policy decisions; the token count of the surrogate
    // objective in the simulator.
    std::size_t decision_count = 0;
    // Original text, kept for FormatError diagnostics.
    std::string raw;

    std::size_t tool_call_count() const noexcept;
};

struct FormatError {
    std::size_t offset = 0;  // first violating byte
    std::string reason;
};

enum class ToolPolicy {
    Strict,       // only `search` and `visit`, with validated arguments
    PassThrough,  // any tool name; arguments kept as JSON text
};

struct ParseOptions {
    ToolPolicy tools = ToolPolicy::Strict;
    // Accept a transcript that stops right after a tool_response, returning
    // it with status Overlength. Used to round-trip budget-exhausted rollouts.
    bool allow_unterminated = false;
};

using ParseResult = std::variant<Rollout, FormatError>;

ParseResult parse_rollout(std::string_view raw, const ParseOptions& options = {});

/// Inverse of parse_rollout for Ok and Overlength rollouts. Blocks are
/// separated by a single newline; tool-call bodies are compact JSON.
std::string serialize_rollout(const Rollout& rollout);

/// The thought texts in step order; nothing from tool calls, observations
/// or the answer.
std::vector<std::string> thoughts_of(const Rollout& rollout);

/// Every text of the trajectory: thoughts, tool-call bodies, observations
/// and the answer. Used to contrast thought-only with whole-trajectory
/// matching.
std::vector<std::string> trajectory_texts_of(const Rollout& rollout);

/// Compact JSON body of a tool call as it appears inside <tool_call>.
std::string tool_call_body(const Action& action);

}  // namespace egrpo
