// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace egrpo {

using EntityId = std::uint32_t;

struct Entity {
    EntityId id = 0;
    std::string name;
    std::vector<std::string> descriptors;
};

struct Fact {
    EntityId subject = 0;
    std::string relation;
    EntityId object = 0;
};

/// Immutable typed entity-relation graph behind the simulated tools.
/// Relations are functional: at most one object per (subject, relation).
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    KnowledgeBase(std::vector<Entity> entities, std::vector<Fact> facts, std::uint64_t seed);

    const std::vector<Entity>& entities() const noexcept { return entities_; }
    const std::vector<Fact>& facts() const noexcept { return facts_; }
    std::uint64_t seed() const noexcept { return seed_; }

    bool contains(EntityId id) const noexcept;
    const Entity& entity(EntityId id) const;
    std::optional<EntityId> find_by_name(std::string_view name) const;

    /// Fact indices, ascending.
    const std::vector<std::size_t>& outgoing(EntityId id) const;
    const std::vector<std::size_t>& incoming(EntityId id) const;

    std::optional<EntityId> follow(EntityId subject, std::string_view relation) const;

    /// Entities carrying every descriptor in `descriptors`.
    std::vector<EntityId> with_descriptors(std::span<const std::string> descriptors) const;

    /// Copy without fact `fact_index` (for constructing broken premises).
    KnowledgeBase without_fact(std::size_t fact_index) const;

    /// Sorted distinct search tokens of entities()[index] (name + descriptors).
    const std::vector<std::string>& search_tokens(std::size_t index) const { return tokens_[index]; }

private:
    std::vector<Entity> entities_;
    std::vector<Fact> facts_;
    std::uint64_t seed_ = 0;
    std::unordered_map<std::string, EntityId> by_name_;
    std::unordered_map<EntityId, std::size_t> index_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::vector<std::size_t>> in_;
    std::vector<std::vector<std::string>> tokens_;
};

struct WorldConfig {
    std::size_t num_entities = 200;
    std::size_t descriptors_per_entity = 3;
    std::size_t min_out_degree = 1;
    std::size_t max_out_degree = 2;
    std::uint64_t seed = 1;
};

KnowledgeBase generate_world(const WorldConfig& cfg);

/// Line format, version 1:
///   # egrpo-kb 1 seed=<seed>
///   E <id> <name> | <descriptor>,<descriptor>,...
///   F <subject-id> <relation> <object-id>
std::string kb_to_text(const KnowledgeBase& kb);
KnowledgeBase kb_from_text(std::string_view text);
void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::filesystem::path& path);

/// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// ---- simulated tools -------------------------------------------------------

struct ToolConfig {
    std::size_t top_k = 10;
    std::size_t distractor_count = 0;
};

struct SearchHit {
    EntityId id = 0;
    std::size_t score = 0;         // distinct query tokens matched
    std::size_t query_tokens = 0;  // distinct tokens in the query
    bool distractor = false;
};

struct SearchObservation {
    std::string text;
    std::vector<SearchHit> hits;  // every listed entity, in listing order
};

/// Per query: the top_k entities by |query tokens ∩ (name ∪ descriptor
/// tokens)| with seeded hash tie-breaks, plus distractor_count random
/// distractors at seeded positions.
SearchObservation tool_search(const KnowledgeBase& kb, std::span<const std::string> queries,
                              const ToolConfig& cfg, std::uint64_t seed);

struct FactLine {
    std::size_t fact_index = 0;
    EntityId page = 0;   // visited entity
    EntityId other = 0;  // the other endpoint
    std::string relation;
    bool outgoing = true;  // page is the subject
};

struct VisitObservation {
    std::string text;
    std::vector<FactLine> lines;
};

/// Each page: one header line, then every outgoing and incoming fact in
/// fact-index order. Throws UnknownEntity.
VisitObservation tool_visit(const KnowledgeBase& kb, std::span<const EntityId> ids, std::string_view goal);

std::string entity_url(EntityId id);

}  // namespace egrpo
