// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "egrpo/entity_match.hpp"
#include "egrpo/errors.hpp"
#include "egrpo/reward.hpp"
#include "egrpo/rollout.hpp"
#include "egrpo/service.hpp"
#include "egrpo/trainer.hpp"

namespace py = pybind11;
using namespace egrpo;

namespace {

py::object fraction(const Rational& r) {
    static py::object cls = py::module_::import("fractions").attr("Fraction");
    return cls(r.numerator(), r.denominator());
}

RolloutStatus status_from(const std::string& s) {
    if (s == "ok") return RolloutStatus::Ok;
    if (s == "format_error") return RolloutStatus::FormatError;
    if (s == "overlength") return RolloutStatus::Overlength;
    throw Error(ErrorCode::InvalidArgument, "unknown status '" + s + "'");
}

std::optional<Verdict> verdict_from(const py::object& v) {
    if (v.is_none()) return std::nullopt;
    const auto s = v.cast<std::string>();
    if (s == "correct") return Verdict::Correct;
    if (s == "wrong") return Verdict::Wrong;
    throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + s + "'");
}

MatchConfig match_config(bool case_sensitive, bool whitespace_collapse, bool word_boundary) {
    MatchConfig c;
    c.case_sensitive = case_sensitive;
    c.whitespace_collapse = whitespace_collapse;
    c.word_boundary = word_boundary;
    return c;
}

py::dict metrics_dict(const StepMetrics& m) {
    py::dict d;
    d["step"] = m.step;
    d["train_accuracy"] = m.train_accuracy;
    d["mean_tool_calls"] = m.mean_tool_calls;
    d["mean_gamma"] = m.mean_gamma;
    d["mean_reward"] = m.mean_reward;
    d["clipped_fraction"] = m.clipped_fraction;
    d["overlength_fraction"] = m.overlength_fraction;
    d["format_error_fraction"] = m.format_error_fraction;
    d["max_ratio_dev"] = m.max_ratio_dev;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Entity-aware group-relative reward shaping";

    static py::exception<Error> error(m, "EgrpoError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string message = std::string(error_code_name(e.code())) + ": " + e.what();
            py::set_error(error, message.c_str());
        }
    });

    m.def(
        "match_entities",
        [](const std::vector<std::string>& thoughts, const std::vector<std::string>& entities, bool case_sensitive,
           bool whitespace_collapse, bool word_boundary) {
            const EntitySet es(entities, match_config(case_sensitive, whitespace_collapse, word_boundary));
            const MatchReport r = match_entities(thoughts, es);
            return py::make_tuple(fraction(r.gamma), r.matched_phrases(es));
        },
        py::arg("thoughts"), py::arg("entities"), py::kw_only(), py::arg("case_sensitive") = true,
        py::arg("whitespace_collapse") = false, py::arg("word_boundary") = false,
        "Fraction of distinct entities mentioned in the thoughts, and which ones.");

    m.def(
        "score_group",
        [](const py::list& rollouts, const std::vector<std::string>& entities, double alpha, const std::string& mode) {
            std::vector<RolloutOutcome> outcomes;
            for (const auto& item : rollouts) {
                const auto d = item.cast<py::dict>();
                RolloutOutcome o;
                o.status = status_from(d.contains("status") ? d["status"].cast<std::string>() : "ok");
                o.verdict = verdict_from(d.contains("verdict") ? py::object(d["verdict"]) : py::none());
                if (d.contains("thoughts")) o.thoughts = d["thoughts"].cast<std::vector<std::string>>();
                outcomes.push_back(std::move(o));
            }
            RewardConfig cfg;
            cfg.alpha = alpha;
            cfg.mode = parse_reward_mode(mode);
            const GroupScore s = score_group(outcomes, EntitySet(entities), cfg);
            py::list out;
            for (const auto& r : s.per_rollout) {
                py::dict d;
                d["gamma"] = fraction(r.gamma);
                d["gamma_hat"] = fraction(r.gamma_hat);
                d["reward"] = r.reward;
                d["advantage"] = r.advantage;
                d["in_loss"] = r.in_loss;
                out.append(d);
            }
            return out;
        },
        py::arg("rollouts"), py::arg("entities"), py::kw_only(), py::arg("alpha") = 0.3, py::arg("mode") = "egrpo",
        "Score one group. Each rollout is a dict with status, verdict and thoughts.");

    m.def(
        "parse_thoughts",
        [](const std::string& raw, bool pass_through) {
            ParseOptions opts;
            opts.tools = pass_through ? ToolPolicy::PassThrough : ToolPolicy::Strict;
            const ParseResult r = parse_rollout(raw, opts);
            if (const auto* e = std::get_if<FormatError>(&r)) {
                throw Error(ErrorCode::FormatError, "at byte " + std::to_string(e->offset) + ": " + e->reason);
            }
            return thoughts_of(std::get<Rollout>(r));
        },
        py::arg("raw"), py::kw_only(), py::arg("pass_through") = true,
        "Thought texts of a tag-format rollout; raises EgrpoError on a format violation.");

    m.def(
        "handle_request", [](const std::string& line) { return handle_request_line(line, 1); }, py::arg("line"),
        "One reward-service request line in, one response line out.");

    m.def(
        "train",
        [](const std::string& config_json, std::size_t entities, std::size_t questions, std::uint64_t world_seed) {
            WorldConfig wc;
            wc.num_entities = entities;
            wc.seed = world_seed;
            DatasetConfig dc;
            dc.num_questions = questions;
            dc.seed = world_seed;
            const TrainConfig cfg = train_config_from_json(config_json);
            TrainResult result;
            {
                py::gil_scoped_release release;
                const KnowledgeBase kb = generate_world(wc);
                const auto ds = synth_dataset(kb, dc);
                result = train(kb, ds, cfg);
            }
            py::list rows;
            for (const auto& row : result.metrics) rows.append(metrics_dict(row));
            return rows;
        },
        py::arg("config_json") = "{}", py::kw_only(), py::arg("entities") = 200, py::arg("questions") = 500,
        py::arg("world_seed") = 1, "Train on a generated world and return per-step metrics.");

    m.attr("PROTOCOL_VERSION") = kProtocolVersion;
    m.attr("SERVICE_VERSION") = kServiceVersion;
}
