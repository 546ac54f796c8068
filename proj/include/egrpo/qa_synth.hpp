// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egrpo/entity_match.hpp"
#include "egrpo/kb.hpp"

namespace egrpo {

enum class SynthMethod { InjectFuzz, SubgraphObfuscate };

std::string_view to_string(SynthMethod method) noexcept;
SynthMethod parse_synth_method(std::string_view text);

/// Where the relation chain of a question starts: a literal entity name, or
/// (once obfuscated) a set of descriptors that picks out exactly one entity.
struct AnchorSpec {
    std::optional<std::string> name;
    std::vector<std::string> descriptors;

    bool named() const noexcept { return name.has_value(); }
    bool operator==(const AnchorSpec&) const = default;
};

/// A synthesized question. The question asks for the entity reached by
/// following `relations` in order from the anchor; `entity_set` holds the
/// names the synthesis replaced or hid on the way, never the answer.
struct QARecord {
    std::string id;
    std::string question;
    EntityId answer_id = 0;
    std::string answer_text;
    EntitySet entity_set;
    std::size_t hops = 0;
    SynthMethod method = SynthMethod::InjectFuzz;
    AnchorSpec anchor;
    std::vector<std::string> relations;
    // Entity the anchor stands for; not serialized, recomputed by the oracle.
    std::optional<EntityId> anchor_id;
};

/// Template rendering of anchor + relation chain.
std::string render_question(const AnchorSpec& anchor, const std::vector<std::string>& relations);

/// One-hop question "What is the <r> of <name>?" from an outgoing fact.
QARecord make_seed_question(const KnowledgeBase& kb, std::size_t fact_index);

/// Shortest descriptor subset of `id` that no other entity carries in full,
/// or nullopt when even the full descriptor list is shared.
std::optional<std::vector<std::string>> unique_descriptors(const KnowledgeBase& kb, EntityId id);

/// `depth` rounds of injection (the named anchor X becomes "the <r> of Y" for
/// an incoming fact (Y, r, X)) or fuzzing (the name is replaced by a unique
/// descriptor subset), chosen per round by a seeded coin with P(inject) =
/// `inject_bias`; when the chosen operation is impossible the other is
/// tried. Each round appends the replaced entity to entity_set.
/// Throws NotExpandable when the anchor is no longer named or neither
/// operation applies.
QARecord synth_inject_fuzz(const KnowledgeBase& kb, const QARecord& seed_question, std::size_t depth,
                           std::uint64_t rng_seed, double inject_bias = 0.5);

/// Random walk of `walk_length` distinct nodes along outgoing facts; the
/// first node is obfuscated to descriptors, the last is the answer.
/// Throws InvalidArgument for walk_length < 2 and NoUniqueAnswer after
/// `max_attempts` failed walks.
QARecord synth_subgraph(const KnowledgeBase& kb, std::size_t walk_length, std::uint64_t rng_seed,
                        std::size_t max_attempts = 64);

/// The unique entity satisfying the question's constraints, by set
/// propagation over the whole kb. Throws Unsolvable or Ambiguous.
EntityId oracle_solve(const KnowledgeBase& kb, const QARecord& qa);

struct DatasetConfig {
    std::size_t num_questions = 500;
    std::size_t min_hops = 2;
    std::size_t max_hops = 3;
    double inject_fuzz_fraction = 0.3;
    double inject_bias = 0.5;
    std::uint64_t seed = 1;
};

/// Mixed dataset, deduplicated by question text, every record checked
/// against oracle_solve and for name leaks.
std::vector<QARecord> synth_dataset(const KnowledgeBase& kb, const DatasetConfig& cfg);

/// True iff some entity_set phrase occurs in the question text.
bool leaks_entity(const QARecord& qa);

/// JSON lines: one object per record with id, question, answer_id, answer,
/// hops, method, entities, anchor {name, descriptors}, relations.
std::string qa_to_json_line(const QARecord& qa);
QARecord qa_from_json_line(std::string_view line);
void save_dataset(const std::filesystem::path& path, const std::vector<QARecord>& records);
std::vector<QARecord> load_dataset(const std::filesystem::path& path);

}  // namespace egrpo
