// SPDX-License-Identifier: Apache-2.0
#include "egrpo/env.hpp"

#include <algorithm>
#include <cmath>

#include "egrpo/errors.hpp"

namespace egrpo {

namespace {

std::string_view slot_kind_name(SlotKind kind) {
    switch (kind) {
        case SlotKind::Empty: return "empty";
        case SlotKind::FullMatch: return "full";
        case SlotKind::PartialMatch: return "partial";
        case SlotKind::NextRelation: return "next";
        case SlotKind::OtherRelation: return "other";
        case SlotKind::Incoming: return "incoming";
    }
    return "?";
}

std::string_view budget_bucket(std::size_t left) {
    if (left <= 1) return "1";
    if (left <= 3) return "2-3";
    if (left <= 6) return "4-6";
    return "7+";
}

bool matches_anchor(const Entity& e, const AnchorSpec& anchor) {
    if (anchor.named()) return e.name == *anchor.name;
    return std::all_of(anchor.descriptors.begin(), anchor.descriptors.end(), [&](const std::string& d) {
        return std::find(e.descriptors.begin(), e.descriptors.end(), d) != e.descriptors.end();
    });
}

std::string anchor_query(const AnchorSpec& anchor) {
    if (anchor.named()) return *anchor.name;
    std::string q;
    for (const auto& d : anchor.descriptors) {
        if (!q.empty()) q += ' ';
        q += d;
    }
    return q;
}

}  // namespace

AgentChoice LogLinearAgent::choose(const AgentView&, std::span<const double> features, Rng& rng) {
    const std::vector<double> lp = log_softmax(*params_, features);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = lp.size() - 1;
    for (std::size_t a = 0; a < lp.size(); ++a) {
        cum += std::exp(lp[a]);
        if (u < cum) {
            pick = a;
            break;
        }
    }
    return AgentChoice{pick, lp[pick], std::nullopt};
}

std::vector<double> encode_features(const AgentView& view, std::size_t feature_dim) {
    if (feature_dim == 0) throw Error(ErrorCode::InvalidArgument, "feature_dim must be >= 1");
    std::vector<double> x(feature_dim, 0.0);
    auto put = [&](std::string_view token) { x[fnv1a(token) % feature_dim] += 1.0; };

    put("bias");
    switch (view.last) {
        case AgentView::Last::None: put("last=none"); break;
        case AgentView::Last::Search: put("last=search"); break;
        case AgentView::Last::Visit: put("last=visit"); break;
        case AgentView::Last::Error: put("last=error"); break;
    }
    put("budget=" + std::string(budget_bucket(view.budget_left)));
    const std::size_t hops = view.question ? view.question->hops : 0;
    switch (view.chain) {
        case ChainState::Start: put("chain=start"); break;
        case ChainState::On: put("chain=on"); put("left=" + std::to_string(hops - view.hops_done)); break;
        case ChainState::End: put("chain=end"); break;
        case ChainState::Lost: put("chain=lost"); break;
    }
    put(view.working_memory.empty() ? "wm=empty" : "wm=some");
    if (view.question) put(view.question->anchor.named() ? "anchor=named" : "anchor=described");
    for (std::size_t k = 0; k < view.slots.size(); ++k) {
        const std::string prefix = "s" + std::to_string(k);
        put(prefix + "=" + std::string(slot_kind_name(view.slots[k].kind)));
        if (view.slots[k].seen) put(prefix + ":seen");
    }
    return x;
}

std::string render_thought(const KnowledgeBase& kb, std::span<const EntityId> working_memory) {
    if (working_memory.empty()) return "considering: nothing yet";
    std::string t = "considering: ";
    for (std::size_t i = 0; i < working_memory.size(); ++i) {
        if (i) t += "; ";
        t += kb.entity(working_memory[i]).name;
    }
    return t;
}

Episode run_episode(const KnowledgeBase& kb, const QARecord& qa, Agent& agent, const EpisodeConfig& cfg,
                    std::uint64_t rng_seed) {
    if (cfg.tool_budget == 0 || cfg.top_k == 0 || cfg.candidate_slots == 0) {
        throw Error(ErrorCode::InvalidArgument, "tool_budget, top_k and candidate_slots must be >= 1");
    }
    Rng rng(derive_seed({rng_seed, 0x6570ULL}));
    const ToolConfig tools{cfg.top_k, cfg.distractor_count};
    const std::string query = anchor_query(qa.anchor);

    AgentView view;
    view.kb = &kb;
    view.question = &qa;
    view.slots.assign(cfg.candidate_slots, Slot{});
    std::optional<EntityId> chain_entity;

    Episode ep;
    auto& steps = ep.rollout.steps;
    while (true) {
        view.step = steps.size();
        view.tool_calls = ep.tool_calls;
        view.budget_left = cfg.tool_budget - ep.tool_calls;
        for (auto& s : view.slots) {
            s.seen = s.kind != SlotKind::Empty &&
                     std::find(view.working_memory.begin(), view.working_memory.end(), s.id) != view.working_memory.end();
        }

        std::vector<double> features = encode_features(view, cfg.feature_dim);
        const AgentChoice choice = agent.choose(view, features, rng);
        if (choice.action >= cfg.action_dim()) {
            throw Error(ErrorCode::InvalidArgument, "agent chose action " + std::to_string(choice.action) + " of " +
                                                        std::to_string(cfg.action_dim()));
        }
        ep.decisions.push_back(DecisionRecord{std::move(features), choice.action, choice.logprob});

        if (choice.action == kActionAnswer) {
            const std::optional<EntityId> target = choice.answer_override ? choice.answer_override : view.focus;
            const std::string text = target ? kb.entity(*target).name : std::string("unknown");
            steps.push_back(Step{render_thought(kb, view.working_memory), AnswerAction{text}, std::nullopt});
            ep.answered = target;
            ep.judged = (target && *target == qa.answer_id) ? Verdict::Correct : Verdict::Wrong;
            ep.rollout.status = RolloutStatus::Ok;
            ep.rollout.verdict = ep.judged;
            break;
        }

        if (choice.action == kActionSearch) {
            const std::vector<std::string> queries{query};
            SearchObservation obs = tool_search(kb, queries, tools, derive_seed({rng_seed, ep.tool_calls}));
            view.slots.assign(cfg.candidate_slots, Slot{});
            for (std::size_t k = 0; k < cfg.candidate_slots && k < obs.hits.size(); ++k) {
                const EntityId id = obs.hits[k].id;
                view.slots[k] = Slot{id, matches_anchor(kb.entity(id), qa.anchor) ? SlotKind::FullMatch : SlotKind::PartialMatch};
            }
            steps.push_back(Step{render_thought(kb, view.working_memory), SearchAction{queries}, std::move(obs.text)});
            view.last = AgentView::Last::Search;
        } else {
            const std::size_t k = choice.action - kFirstVisitAction;
            const Slot slot = view.slots[k];
            if (slot.kind == SlotKind::Empty) {
                steps.push_back(Step{render_thought(kb, view.working_memory),
                                     VisitAction{{"kb://none"}, "inspect listing slot " + std::to_string(k + 1)},
                                     "error: listing slot " + std::to_string(k + 1) + " is empty"});
                view.slots.assign(cfg.candidate_slots, Slot{});
                view.last = AgentView::Last::Error;
            } else {
                const EntityId e = slot.id;
                if (slot.kind == SlotKind::NextRelation) {
                    ++view.hops_done;
                    view.chain = view.hops_done >= qa.hops ? ChainState::End : ChainState::On;
                    chain_entity = e;
                } else if (slot.kind == SlotKind::FullMatch) {
                    view.hops_done = 0;
                    view.chain = qa.hops == 0 ? ChainState::End : ChainState::On;
                    chain_entity = e;
                } else {
                    view.chain = ChainState::Lost;
                    chain_entity.reset();
                }
                if (std::find(view.working_memory.begin(), view.working_memory.end(), e) == view.working_memory.end()) {
                    view.working_memory.push_back(e);
                }
                view.focus = e;

                const std::string goal = "inspect the page of " + kb.entity(e).name;
                const EntityId ids[] = {e};
                VisitObservation obs = tool_visit(kb, ids, goal);
                view.slots.assign(cfg.candidate_slots, Slot{});
                for (std::size_t i = 0; i < cfg.candidate_slots && i < obs.lines.size(); ++i) {
                    const FactLine& line = obs.lines[i];
                    SlotKind kind = SlotKind::OtherRelation;
                    if (!line.outgoing) {
                        kind = SlotKind::Incoming;
                    } else if (view.chain == ChainState::On && chain_entity == line.page &&
                               view.hops_done < qa.relations.size() && line.relation == qa.relations[view.hops_done]) {
                        kind = SlotKind::NextRelation;
                    }
                    view.slots[i] = Slot{line.other, kind};
                }
                steps.push_back(Step{render_thought(kb, view.working_memory), VisitAction{{entity_url(e)}, goal},
                                     std::move(obs.text)});
                view.last = AgentView::Last::Visit;
            }
        }
        ++ep.tool_calls;
        if (ep.tool_calls >= cfg.tool_budget) {
            ep.rollout.status = RolloutStatus::Overlength;
            break;
        }
    }
    ep.rollout.decision_count = ep.decisions.size();
    ep.working_memory = view.working_memory;
    return ep;
}

std::unique_ptr<Agent> make_oracle_agent() {
    return std::make_unique<ScriptedAgent>([](const AgentView& v) {
        auto act = [](std::size_t a) { return AgentChoice{a, 0.0, std::nullopt}; };
        auto pick = [&](SlotKind kind) -> std::optional<std::size_t> {
            for (std::size_t k = 0; k < v.slots.size(); ++k) {
                if (v.slots[k].kind == kind) return kFirstVisitAction + k;
            }
            return std::nullopt;
        };
        if (v.chain == ChainState::End) return act(kActionAnswer);
        if (v.chain == ChainState::On) {
            if (auto a = pick(SlotKind::NextRelation)) return act(*a);
            return act(kActionAnswer);
        }
        if (v.last == AgentView::Last::Search) {
            if (auto a = pick(SlotKind::FullMatch)) return act(*a);
        }
        return act(kActionSearch);
    });
}

}  // namespace egrpo
