// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egrpo/kb.hpp"
#include "egrpo/policy.hpp"
#include "egrpo/qa_synth.hpp"
#include "egrpo/rng.hpp"
#include "egrpo/rollout.hpp"

namespace egrpo {

inline constexpr std::size_t kLongToolBudget = 40;

struct EpisodeConfig {
    std::size_t tool_budget = 12;
    std::size_t top_k = 3;
    std::size_t distractor_count = 1;
    std::size_t candidate_slots = 4;  // visit targets exposed to the policy
    std::size_t feature_dim = 512;

    std::size_t action_dim() const noexcept { return 2 + candidate_slots; }
};

// Action layout: 0 = search for the question's anchor, 1 = answer with the
// focus (the entity visited last), 2 + k = visit slot k of the latest
// listing (search hits or the facts of the page just visited).
inline constexpr std::size_t kActionSearch = 0;
inline constexpr std::size_t kActionAnswer = 1;
inline constexpr std::size_t kFirstVisitAction = 2;

/// Progress along the question's relation chain, as far as the agent can tell
/// from its own observations.
enum class ChainState { Start, On, End, Lost };

enum class SlotKind { Empty, FullMatch, PartialMatch, NextRelation, OtherRelation, Incoming };

struct Slot {
    EntityId id = 0;
    SlotKind kind = SlotKind::Empty;
    bool seen = false;  // already in working memory
};

/// Everything a policy may look at before a decision.
struct AgentView {
    const KnowledgeBase* kb = nullptr;
    const QARecord* question = nullptr;
    std::size_t step = 0;
    std::size_t tool_calls = 0;
    std::size_t budget_left = 0;
    enum class Last { None, Search, Visit, Error } last = Last::None;
    ChainState chain = ChainState::Start;
    std::size_t hops_done = 0;
    std::vector<Slot> slots;  // exactly candidate_slots entries
    std::vector<EntityId> working_memory;
    std::optional<EntityId> focus;
};

struct AgentChoice {
    std::size_t action = 0;
    double logprob = 0.0;
    // Scripted agents may answer with an arbitrary entity.
    std::optional<EntityId> answer_override;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual AgentChoice choose(const AgentView& view, std::span<const double> features, Rng& rng) = 0;
};

/// Samples from softmax(features^T theta) by inverse CDF on one uniform draw.
class LogLinearAgent : public Agent {
public:
    explicit LogLinearAgent(const PolicyParams& params) : params_(&params) {}
    AgentChoice choose(const AgentView& view, std::span<const double> features, Rng& rng) override;

private:
    const PolicyParams* params_;
};

class ScriptedAgent : public Agent {
public:
    using Script = std::function<AgentChoice(const AgentView&)>;
    explicit ScriptedAgent(Script script) : script_(std::move(script)) {}
    AgentChoice choose(const AgentView& view, std::span<const double>, Rng&) override { return script_(view); }

private:
    Script script_;
};

/// Hashed bag of state tokens (last action kind, budget bucket, chain state,
/// hops left, working-memory occupancy, anchor kind, per-slot kinds), one-hot
/// into feature_dim buckets.
std::vector<double> encode_features(const AgentView& view, std::size_t feature_dim);

struct Episode {
    Rollout rollout;
    std::vector<DecisionRecord> decisions;
    std::optional<Verdict> judged;
    std::optional<EntityId> answered;
    std::vector<EntityId> working_memory;
    std::size_t tool_calls = 0;
};

/// Synthetic thought for a working memory: "considering: A; B" or
/// "considering: nothing yet".
std::string render_thought(const KnowledgeBase& kb, std::span<const EntityId> working_memory);

/// One episode: a decision per step, a tool observation after every tool
/// call, Overlength once tool_budget calls are spent without an answer.
/// Correct iff the answered id equals qa.answer_id.
Episode run_episode(const KnowledgeBase& kb, const QARecord& qa, Agent& agent, const EpisodeConfig& cfg,
                    std::uint64_t rng_seed);

/// The shortest successful script: search, visit the anchor, follow the chain,
/// answer. Used as a reference "perfect" policy in tests and tools.
std::unique_ptr<Agent> make_oracle_agent();

}  // namespace egrpo
