// SPDX-License-Identifier: Apache-2.0
#include "egrpo/rollout.hpp"

#include <algorithm>
#include <array>

#include <json.hpp>

namespace egrpo {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kCallOpen = "<tool_call>";
constexpr std::string_view kCallClose = "</tool_call>";
constexpr std::string_view kResponseOpen = "<tool_response>";
constexpr std::string_view kResponseClose = "</tool_response>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

constexpr std::array<std::string_view, 8> kAllTags = {
    kThinkOpen, kThinkClose, kCallOpen, kCallClose,
    kResponseOpen, kResponseClose, kAnswerOpen, kAnswerClose,
};

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

struct ParseFailure {
    FormatError error;
};

[[noreturn]] void fail(std::size_t offset, std::string reason) {
    throw ParseFailure{FormatError{offset, std::move(reason)}};
}

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    std::size_t pos() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ >= text_.size(); }

    void skip_space() noexcept {
        while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    }

    bool peek(std::string_view tag) const noexcept {
        return text_.substr(pos_, tag.size()) == tag;
    }

    void expect(std::string_view tag) {
        if (at_end()) fail(pos_, "unexpected end of input, expected " + std::string(tag));
        if (!peek(tag)) fail(pos_, "expected " + std::string(tag));
        pos_ += tag.size();
    }

    // Body up to `close`; the cursor moves past the closing tag. Bodies may
    // not contain any tag of the grammar.
    std::pair<std::string_view, std::size_t> body_until(std::string_view close) {
        const std::size_t start = pos_;
        const std::size_t end = text_.find(close, start);
        if (end == std::string_view::npos) {
            fail(text_.size(), "unexpected end of input, missing " + std::string(close));
        }
        const std::string_view body = text_.substr(start, end - start);
        std::size_t first_tag = std::string_view::npos;
        for (auto tag : kAllTags) {
            first_tag = std::min(first_tag, body.find(tag));
        }
        if (first_tag != std::string_view::npos) {
            fail(start + first_tag, "tag inside " + std::string(close.substr(2, close.size() - 3)) + " body");
        }
        pos_ = end + close.size();
        return {body, start};
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::vector<std::string> string_list(const json& value, std::size_t offset, const char* what) {
    std::vector<std::string> out;
    if (value.is_string()) {
        out.push_back(value.get<std::string>());
    } else if (value.is_array()) {
        for (const auto& item : value) {
            if (!item.is_string()) fail(offset, std::string(what) + " must contain only strings");
            out.push_back(item.get<std::string>());
        }
    } else {
        fail(offset, std::string(what) + " must be a string or a list of strings");
    }
    if (out.empty()) fail(offset, std::string(what) + " must not be empty");
    return out;
}

Action parse_tool_call(std::string_view body, std::size_t offset, ToolPolicy policy) {
    json call;
    try {
        call = json::parse(body);
    } catch (const json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        fail(offset + std::min(at, body.size()), "tool_call body is not valid JSON");
    }
    if (!call.is_object()) fail(offset, "tool_call body must be a single object");
    if (call.size() != 2 || !call.contains("name") || !call.contains("arguments")) {
        fail(offset, "tool_call object must have exactly \"name\" and \"arguments\"");
    }
    const json& name = call["name"];
    const json& args = call["arguments"];
    if (!name.is_string()) fail(offset, "tool name must be a string");
    if (!args.is_object()) fail(offset, "tool arguments must be an object");
    const auto tool = name.get<std::string>();

    if (tool == "search") {
        if (args.size() != 1 || !args.contains("query")) {
            fail(offset, "search takes exactly one argument \"query\"");
        }
        return SearchAction{string_list(args["query"], offset, "query")};
    }
    if (tool == "visit") {
        if (args.size() != 2 || !args.contains("url") || !args.contains("goal")) {
            fail(offset, "visit takes exactly \"url\" and \"goal\"");
        }
        VisitAction visit;
        visit.urls = string_list(args["url"], offset, "url");
        if (!args["goal"].is_string() || args["goal"].get<std::string>().empty()) {
            fail(offset, "visit goal must be a nonempty string");
        }
        visit.goal = args["goal"].get<std::string>();
        return visit;
    }
    if (policy == ToolPolicy::PassThrough) {
        return OtherToolAction{tool, args.dump()};
    }
    fail(offset, "unknown tool \"" + tool + "\"");
}

Rollout parse_or_throw(std::string_view raw, const ParseOptions& options) {
    Rollout rollout;
    Cursor cur(raw);
    cur.skip_space();
    for (;;) {
        cur.expect(kThinkOpen);
        auto [thought, thought_at] = cur.body_until(kThinkClose);
        (void)thought_at;
        cur.skip_space();

        if (cur.peek(kAnswerOpen)) {
            cur.expect(kAnswerOpen);
            auto [answer, answer_at] = cur.body_until(kAnswerClose);
            (void)answer_at;
            rollout.steps.push_back(Step{std::string(thought), AnswerAction{std::string(trim(answer))}, std::nullopt});
            cur.skip_space();
            if (!cur.at_end()) fail(cur.pos(), "trailing content after </answer>");
            rollout.status = RolloutStatus::Ok;
            break;
        }
        if (cur.peek(kCallOpen)) {
            cur.expect(kCallOpen);
            auto [body, body_at] = cur.body_until(kCallClose);
            Action action = parse_tool_call(body, body_at, options.tools);
            cur.skip_space();
            cur.expect(kResponseOpen);
            auto [observation, obs_at] = cur.body_until(kResponseClose);
            (void)obs_at;
            rollout.steps.push_back(Step{std::string(thought), std::move(action), std::string(observation)});
            cur.skip_space();
            if (cur.at_end() && options.allow_unterminated) {
                rollout.status = RolloutStatus::Overlength;
                break;
            }
            continue;
        }
        if (cur.at_end()) fail(cur.pos(), "unexpected end of input, expected <tool_call> or <answer>");
        fail(cur.pos(), "expected <tool_call> or <answer>");
    }
    rollout.decision_count = rollout.steps.size();
    return rollout;
}

}  // namespace

bool is_answer(const Action& action) noexcept {
    return std::holds_alternative<AnswerAction>(action);
}

bool is_tool_call(const Action& action) noexcept {
    return !is_answer(action);
}

std::string_view to_string(RolloutStatus status) noexcept {
    switch (status) {
        case RolloutStatus::Ok: return "ok";
        case RolloutStatus::FormatError: return "format_error";
        case RolloutStatus::Overlength: return "overlength";
    }
    return "ok";
}

std::string_view to_string(Verdict verdict) noexcept {
    return verdict == Verdict::Correct ? "correct" : "wrong";
}

std::size_t Rollout::tool_call_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(),
                                                  [](const Step& s) { return is_tool_call(s.action); }));
}

ParseResult parse_rollout(std::string_view raw, const ParseOptions& options) {
    try {
        return parse_or_throw(raw, options);
    } catch (const ParseFailure& failure) {
        return failure.error;
    }
}

std::string tool_call_body(const Action& action) {
    json call;
    if (const auto* search = std::get_if<SearchAction>(&action)) {
        call["name"] = "search";
        call["arguments"] = {{"query", search->queries}};
    } else if (const auto* visit = std::get_if<VisitAction>(&action)) {
        call["name"] = "visit";
        call["arguments"] = {{"url", visit->urls}, {"goal", visit->goal}};
    } else if (const auto* other = std::get_if<OtherToolAction>(&action)) {
        call["name"] = other->name;
        call["arguments"] = json::parse(other->arguments_json);
    } else {
        return {};
    }
    return call.dump();
}

std::string serialize_rollout(const Rollout& rollout) {
    std::string out;
    for (const auto& step : rollout.steps) {
        if (!out.empty()) out += '\n';
        out += kThinkOpen;
        out += step.thought;
        out += kThinkClose;
        out += '\n';
        if (const auto* answer = std::get_if<AnswerAction>(&step.action)) {
            out += kAnswerOpen;
            out += answer->answer;
            out += kAnswerClose;
            continue;
        }
        out += kCallOpen;
        out += tool_call_body(step.action);
        out += kCallClose;
        out += '\n';
        out += kResponseOpen;
        out += step.observation.value_or("");
        out += kResponseClose;
    }
    return out;
}

std::vector<std::string> thoughts_of(const Rollout& rollout) {
    std::vector<std::string> out;
    out.reserve(rollout.steps.size());
    for (const auto& step : rollout.steps) out.push_back(step.thought);
    return out;
}

std::vector<std::string> trajectory_texts_of(const Rollout& rollout) {
    std::vector<std::string> out;
    for (const auto& step : rollout.steps) {
        out.push_back(step.thought);
        if (const auto* answer = std::get_if<AnswerAction>(&step.action)) {
            out.push_back(answer->answer);
        } else {
            out.push_back(tool_call_body(step.action));
        }
        if (step.observation) out.push_back(*step.observation);
    }
    return out;
}

}  // namespace egrpo
