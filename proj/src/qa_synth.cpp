// SPDX-License-Identifier: Apache-2.0
#include "egrpo/qa_synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "egrpo/errors.hpp"
#include "egrpo/rng.hpp"

namespace egrpo {

using json = nlohmann::ordered_json;

namespace {

std::string spaced(std::string relation) {
    std::replace(relation.begin(), relation.end(), '_', ' ');
    return relation;
}

// Entities on the chain anchor -> ... -> answer, when it can be followed.
std::vector<EntityId> chain_nodes(const KnowledgeBase& kb, EntityId anchor, const std::vector<std::string>& relations) {
    std::vector<EntityId> nodes{anchor};
    for (const auto& r : relations) {
        auto next = kb.follow(nodes.back(), r);
        if (!next) break;
        nodes.push_back(*next);
    }
    return nodes;
}

}  // namespace

std::string_view to_string(SynthMethod method) noexcept {
    return method == SynthMethod::InjectFuzz ? "inject_fuzz" : "subgraph";
}

SynthMethod parse_synth_method(std::string_view text) {
    if (text == "inject_fuzz") return SynthMethod::InjectFuzz;
    if (text == "subgraph") return SynthMethod::SubgraphObfuscate;
    throw Error(ErrorCode::InvalidArgument, "unknown synthesis method '" + std::string(text) + "'");
}

std::string render_question(const AnchorSpec& anchor, const std::vector<std::string>& relations) {
    std::string q = "What is";
    for (auto it = relations.rbegin(); it != relations.rend(); ++it) {
        q += " the " + spaced(*it) + " of";
    }
    if (anchor.named()) {
        q += " " + *anchor.name;
    } else {
        q += " the entity described as ";
        for (std::size_t i = 0; i < anchor.descriptors.size(); ++i) {
            if (i) q += ", ";
            q += anchor.descriptors[i];
        }
    }
    return q + "?";
}

QARecord make_seed_question(const KnowledgeBase& kb, std::size_t fact_index) {
    if (fact_index >= kb.facts().size()) throw Error(ErrorCode::InvalidArgument, "fact index out of range");
    const Fact& f = kb.facts()[fact_index];
    QARecord qa;
    qa.id = "seed-" + std::to_string(fact_index);
    qa.anchor.name = kb.entity(f.subject).name;
    qa.anchor_id = f.subject;
    qa.relations = {f.relation};
    qa.hops = 1;
    qa.answer_id = f.object;
    qa.answer_text = kb.entity(f.object).name;
    qa.method = SynthMethod::InjectFuzz;
    qa.question = render_question(qa.anchor, qa.relations);
    return qa;
}

std::optional<std::vector<std::string>> unique_descriptors(const KnowledgeBase& kb, EntityId id) {
    const auto& all = kb.entity(id).descriptors;
    const std::size_t n = all.size();
    for (std::size_t size = 1; size <= n; ++size) {
        // Subsets of this size in lexicographic index order.
        std::vector<bool> pick(n, false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size), true);
        do {
            std::vector<std::string> subset;
            for (std::size_t i = 0; i < n; ++i) {
                if (pick[i]) subset.push_back(all[i]);
            }
            const auto holders = kb.with_descriptors(subset);
            if (holders.size() == 1 && holders[0] == id) return subset;
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return std::nullopt;
}

QARecord synth_inject_fuzz(const KnowledgeBase& kb, const QARecord& seed_question, std::size_t depth,
                           std::uint64_t rng_seed, double inject_bias) {
    QARecord qa = seed_question;
    if (depth == 0) return qa;
    Rng rng(derive_seed({rng_seed, 0x696eULL}));
    if (!qa.anchor_id && qa.anchor.named()) qa.anchor_id = kb.find_by_name(*qa.anchor.name);

    for (std::size_t round = 0; round < depth; ++round) {
        if (!qa.anchor.named() || !qa.anchor_id) {
            throw Error(ErrorCode::NotExpandable, "question names no entity to transform");
        }
        const EntityId x = *qa.anchor_id;
        const auto chain = chain_nodes(kb, x, qa.relations);
        std::vector<std::size_t> injectable;
        for (auto f : kb.incoming(x)) {
            const EntityId y = kb.facts()[f].subject;
            const bool on_chain = std::find(chain.begin(), chain.end(), y) != chain.end();
            const auto& replaced = qa.entity_set.phrases();
            const bool was_replaced = std::find(replaced.begin(), replaced.end(), kb.entity(y).name) != replaced.end();
            if (!on_chain && !was_replaced) injectable.push_back(f);
        }
        const auto fuzz = unique_descriptors(kb, x);

        bool inject = rng.coin(inject_bias);
        if (inject && injectable.empty()) inject = false;
        if (!inject && !fuzz) inject = true;
        if (inject && injectable.empty()) {
            throw Error(ErrorCode::NotExpandable, "entity '" + kb.entity(x).name + "' can be neither injected nor fuzzed");
        }

        const std::string replaced_name = kb.entity(x).name;
        if (inject) {
            const Fact& f = kb.facts()[injectable[rng.below(injectable.size())]];
            qa.anchor.name = kb.entity(f.subject).name;
            qa.anchor_id = f.subject;
            qa.relations.insert(qa.relations.begin(), f.relation);
            ++qa.hops;
        } else {
            qa.anchor.name.reset();
            qa.anchor.descriptors = *fuzz;
        }
        qa.entity_set = qa.entity_set.with(replaced_name);
        qa.question = render_question(qa.anchor, qa.relations);
    }
    qa.method = SynthMethod::InjectFuzz;
    return qa;
}

QARecord synth_subgraph(const KnowledgeBase& kb, std::size_t walk_length, std::uint64_t rng_seed,
                        std::size_t max_attempts) {
    if (walk_length < 2) throw Error(ErrorCode::InvalidArgument, "walk_length must be >= 2");
    if (kb.entities().empty()) throw Error(ErrorCode::NoUniqueAnswer, "empty knowledge base");
    Rng rng(derive_seed({rng_seed, 0x7367ULL}));

    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<EntityId> nodes{kb.entities()[rng.below(kb.entities().size())].id};
        std::vector<std::string> relations;
        while (nodes.size() < walk_length) {
            std::vector<std::size_t> options;
            for (auto f : kb.outgoing(nodes.back())) {
                const EntityId o = kb.facts()[f].object;
                if (std::find(nodes.begin(), nodes.end(), o) == nodes.end()) options.push_back(f);
            }
            if (options.empty()) break;
            const Fact& f = kb.facts()[options[rng.below(options.size())]];
            nodes.push_back(f.object);
            relations.push_back(f.relation);
        }
        if (nodes.size() < walk_length) continue;

        const auto descriptors = unique_descriptors(kb, nodes.front());
        if (!descriptors) continue;

        QARecord qa;
        qa.anchor.descriptors = *descriptors;
        qa.anchor_id = nodes.front();
        qa.relations = relations;
        qa.hops = relations.size();
        qa.answer_id = nodes.back();
        qa.answer_text = kb.entity(nodes.back()).name;
        qa.method = SynthMethod::SubgraphObfuscate;
        std::vector<std::string> names;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) names.push_back(kb.entity(nodes[i]).name);
        qa.entity_set = EntitySet(std::move(names));
        qa.question = render_question(qa.anchor, qa.relations);

        try {
            if (oracle_solve(kb, qa) != qa.answer_id) continue;
        } catch (const Error&) {
            continue;
        }
        qa.id = "walk-" + std::to_string(rng_seed);
        return qa;
    }
    throw Error(ErrorCode::NoUniqueAnswer, "no uniquely answerable walk after " + std::to_string(max_attempts) + " attempts");
}

EntityId oracle_solve(const KnowledgeBase& kb, const QARecord& qa) {
    std::set<EntityId> current;
    if (qa.anchor.named()) {
        if (auto id = kb.find_by_name(*qa.anchor.name)) current.insert(*id);
    } else {
        const auto ids = kb.with_descriptors(qa.anchor.descriptors);
        current.insert(ids.begin(), ids.end());
    }
    for (const auto& r : qa.relations) {
        std::set<EntityId> next;
        for (auto id : current) {
            if (auto o = kb.follow(id, r)) next.insert(*o);
        }
        current = std::move(next);
    }
    if (current.empty()) throw Error(ErrorCode::Unsolvable, "no entity satisfies '" + qa.question + "'");
    if (current.size() > 1) {
        throw Error(ErrorCode::Ambiguous, std::to_string(current.size()) + " entities satisfy '" + qa.question + "'");
    }
    return *current.begin();
}

bool leaks_entity(const QARecord& qa) {
    for (const auto& phrase : qa.entity_set.phrases()) {
        if (qa.question.find(phrase) != std::string::npos) return true;
    }
    return false;
}

std::vector<QARecord> synth_dataset(const KnowledgeBase& kb, const DatasetConfig& cfg) {
    if (cfg.min_hops < 1 || cfg.min_hops > cfg.max_hops) throw Error(ErrorCode::InvalidArgument, "bad hop range");
    if (kb.facts().empty()) throw Error(ErrorCode::InvalidArgument, "knowledge base has no facts");
    constexpr std::size_t kAttemptsPerQuestion = 500;
    std::vector<QARecord> out;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < cfg.num_questions; ++i) {
        // The method is fixed per slot so the mix follows inject_fuzz_fraction
        // however often one method has to retry.
        Rng slot_rng(derive_seed({cfg.seed, i}));
        const bool inject = slot_rng.coin(cfg.inject_fuzz_fraction);
        bool done = false;
        for (std::size_t attempt = 0; attempt < kAttemptsPerQuestion && !done; ++attempt) {
            const std::uint64_t seed = derive_seed({cfg.seed, i, attempt});
            Rng rng(seed);
            const std::size_t hops = cfg.min_hops + rng.below(cfg.max_hops - cfg.min_hops + 1);
            QARecord qa;
            try {
                if (inject) {
                    const auto seed_q = make_seed_question(kb, rng.below(kb.facts().size()));
                    // hops - 1 injections plus at most one fuzz round
                    const std::size_t depth = hops - 1 + rng.below(2);
                    qa = synth_inject_fuzz(kb, seed_q, depth, seed, cfg.inject_bias);
                    if (qa.hops != hops) continue;
                } else {
                    qa = synth_subgraph(kb, hops + 1, seed, 8);
                }
                if (qa.entity_set.empty() || leaks_entity(qa) || seen.count(qa.question)) continue;
                if (oracle_solve(kb, qa) != qa.answer_id) continue;
            } catch (const Error&) {
                continue;
            }
            char id[32];
            std::snprintf(id, sizeof id, "q%04zu", out.size());
            qa.id = id;
            seen.insert(qa.question);
            out.push_back(std::move(qa));
            done = true;
        }
        if (!done) {
            throw Error(ErrorCode::NoUniqueAnswer, "could only synthesize " + std::to_string(out.size()) + " distinct questions");
        }
    }
    return out;
}

std::string qa_to_json_line(const QARecord& qa) {
    json j;
    j["id"] = qa.id;
    j["question"] = qa.question;
    j["answer_id"] = qa.answer_id;
    j["answer"] = qa.answer_text;
    j["hops"] = qa.hops;
    j["method"] = to_string(qa.method);
    j["entities"] = qa.entity_set.phrases();
    json anchor;
    anchor["name"] = qa.anchor.name ? json(*qa.anchor.name) : json(nullptr);
    anchor["descriptors"] = qa.anchor.descriptors;
    j["anchor"] = anchor;
    j["relations"] = qa.relations;
    return j.dump();
}

QARecord qa_from_json_line(std::string_view line) {
    try {
        const json j = json::parse(line);
        QARecord qa;
        qa.id = j.at("id").get<std::string>();
        qa.question = j.at("question").get<std::string>();
        qa.answer_id = j.at("answer_id").get<EntityId>();
        qa.answer_text = j.at("answer").get<std::string>();
        qa.hops = j.at("hops").get<std::size_t>();
        qa.method = parse_synth_method(j.at("method").get<std::string>());
        qa.entity_set = EntitySet(j.at("entities").get<std::vector<std::string>>());
        const auto& anchor = j.at("anchor");
        if (!anchor.at("name").is_null()) qa.anchor.name = anchor.at("name").get<std::string>();
        qa.anchor.descriptors = anchor.at("descriptors").get<std::vector<std::string>>();
        qa.relations = j.at("relations").get<std::vector<std::string>>();
        if (qa.relations.size() != qa.hops) throw Error(ErrorCode::Io, "hops disagrees with the relation chain");
        return qa;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, std::string("bad dataset record: ") + e.what());
    }
}

void save_dataset(const std::filesystem::path& path, const std::vector<QARecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& qa : records) out << qa_to_json_line(qa) << '\n';
}

std::vector<QARecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<QARecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(qa_from_json_line(line));
    }
    return out;
}

}  // namespace egrpo
