// SPDX-License-Identifier: Apache-2.0
#include "egrpo/kb.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "egrpo/errors.hpp"
#include "egrpo/rng.hpp"

namespace egrpo {

namespace {

constexpr std::array<std::string_view, 48> kDescriptorVocab = {
    "coastal", "northern", "ancient", "maritime", "royal", "alpine", "imperial", "volcanic",
    "baroque", "naval", "arctic", "desert", "river", "merchant", "scholarly", "musical",
    "industrial", "medieval", "colonial", "tropical", "mountain", "island", "frontier", "harbor",
    "celestial", "botanical", "literary", "military", "agrarian", "eastern", "western", "southern",
    "polar", "orbital", "glacial", "civic", "sacred", "nomadic", "lunar", "coral",
    "granite", "silver", "amber", "crimson", "iron", "golden", "misty", "windswept",
};

constexpr std::array<std::string_view, 12> kRelations = {
    "founder", "namesake", "birthplace", "mentor", "rival", "flagship",
    "patron", "successor", "capital", "archive", "sponsor", "headquarters",
};

constexpr std::array<std::string_view, 14> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<std::string_view, 5> kVowels = {"a", "e", "i", "o", "u"};
constexpr std::array<std::string_view, 6> kCodas = {"", "n", "r", "l", "s", "th"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnsets[rng.below(kOnsets.size())];
        w += kVowels[rng.below(kVowels.size())];
        if (i + 1 == syllables || rng.coin(0.3)) w += kCodas[rng.below(kCodas.size())];
    }
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

const std::vector<std::size_t> kNoFacts;

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<Entity> entities, std::vector<Fact> facts, std::uint64_t seed)
    : entities_(std::move(entities)), facts_(std::move(facts)), seed_(seed) {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        const auto& e = entities_[i];
        if (!index_.emplace(e.id, i).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate entity id " + std::to_string(e.id));
        }
        if (e.name.empty() || !by_name_.emplace(e.name, e.id).second) {
            throw Error(ErrorCode::InvalidArgument, "empty or duplicate entity name '" + e.name + "'");
        }
    }
    tokens_.resize(entities_.size());
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        auto& t = tokens_[i];
        t = tokenize(entities_[i].name);
        for (const auto& d : entities_[i].descriptors) {
            auto dt = tokenize(d);
            t.insert(t.end(), dt.begin(), dt.end());
        }
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
    }
    out_.resize(entities_.size());
    in_.resize(entities_.size());
    std::set<std::pair<EntityId, std::string>> functional;
    for (std::size_t f = 0; f < facts_.size(); ++f) {
        const auto& fact = facts_[f];
        if (!contains(fact.subject) || !contains(fact.object)) {
            throw Error(ErrorCode::UnknownEntity, "fact " + std::to_string(f) + " has an unknown endpoint");
        }
        if (!functional.emplace(fact.subject, fact.relation).second) {
            throw Error(ErrorCode::InvalidArgument, "relation '" + fact.relation + "' is not functional for entity " +
                                                        std::to_string(fact.subject));
        }
        out_[index_.at(fact.subject)].push_back(f);
        in_[index_.at(fact.object)].push_back(f);
    }
}

bool KnowledgeBase::contains(EntityId id) const noexcept {
    return index_.find(id) != index_.end();
}

const Entity& KnowledgeBase::entity(EntityId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownEntity, "unknown entity id " + std::to_string(id));
    return entities_[it->second];
}

std::optional<EntityId> KnowledgeBase::find_by_name(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

const std::vector<std::size_t>& KnowledgeBase::outgoing(EntityId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? kNoFacts : out_[it->second];
}

const std::vector<std::size_t>& KnowledgeBase::incoming(EntityId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? kNoFacts : in_[it->second];
}

std::optional<EntityId> KnowledgeBase::follow(EntityId subject, std::string_view relation) const {
    for (auto f : outgoing(subject)) {
        if (facts_[f].relation == relation) return facts_[f].object;
    }
    return std::nullopt;
}

std::vector<EntityId> KnowledgeBase::with_descriptors(std::span<const std::string> descriptors) const {
    std::vector<EntityId> out;
    for (const auto& e : entities_) {
        const bool all = std::all_of(descriptors.begin(), descriptors.end(), [&](const std::string& d) {
            return std::find(e.descriptors.begin(), e.descriptors.end(), d) != e.descriptors.end();
        });
        if (all) out.push_back(e.id);
    }
    return out;
}

KnowledgeBase KnowledgeBase::without_fact(std::size_t fact_index) const {
    auto facts = facts_;
    if (fact_index < facts.size()) facts.erase(facts.begin() + static_cast<std::ptrdiff_t>(fact_index));
    return KnowledgeBase(entities_, std::move(facts), seed_);
}

KnowledgeBase generate_world(const WorldConfig& cfg) {
    if (cfg.num_entities < 2) throw Error(ErrorCode::InvalidArgument, "a world needs at least 2 entities");
    if (cfg.descriptors_per_entity == 0 || cfg.descriptors_per_entity > kDescriptorVocab.size()) {
        throw Error(ErrorCode::InvalidArgument, "bad descriptors_per_entity");
    }
    if (cfg.min_out_degree > cfg.max_out_degree || cfg.max_out_degree > kRelations.size()) {
        throw Error(ErrorCode::InvalidArgument, "bad out-degree range");
    }
    Rng rng(derive_seed({cfg.seed, 0x6b62ULL}));

    // Names are two pseudo-words; every word is unique and no name occurs
    // inside another, so substring matching on names is unambiguous.
    std::vector<std::string> names;
    std::unordered_set<std::string> words;
    while (names.size() < cfg.num_entities) {
        std::string first = pseudo_word(rng, 2);
        std::string second = pseudo_word(rng, 2 + rng.below(2));
        if (words.count(first) || words.count(second) || first == second) continue;
        const std::string name = first + " " + second;
        const bool clash = std::any_of(names.begin(), names.end(), [&](const std::string& other) {
            return other.find(name) != std::string::npos || name.find(other) != std::string::npos;
        });
        if (clash) continue;
        words.insert(first);
        words.insert(second);
        names.push_back(name);
    }

    std::vector<Entity> entities;
    entities.reserve(cfg.num_entities);
    for (std::size_t i = 0; i < cfg.num_entities; ++i) {
        Entity e;
        e.id = static_cast<EntityId>(i);
        e.name = names[i];
        std::vector<std::size_t> pool(kDescriptorVocab.size());
        for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k;
        for (std::size_t k = 0; k < cfg.descriptors_per_entity; ++k) {
            const std::size_t j = k + rng.below(pool.size() - k);
            std::swap(pool[k], pool[j]);
            e.descriptors.emplace_back(kDescriptorVocab[pool[k]]);
        }
        std::sort(e.descriptors.begin(), e.descriptors.end());
        entities.push_back(std::move(e));
    }

    std::vector<Fact> facts;
    for (std::size_t i = 0; i < cfg.num_entities; ++i) {
        const std::size_t degree = cfg.min_out_degree + rng.below(cfg.max_out_degree - cfg.min_out_degree + 1);
        std::vector<std::size_t> rels(kRelations.size());
        for (std::size_t k = 0; k < rels.size(); ++k) rels[k] = k;
        for (std::size_t k = 0; k < degree; ++k) {
            const std::size_t j = k + rng.below(rels.size() - k);
            std::swap(rels[k], rels[j]);
            EntityId object = static_cast<EntityId>(rng.below(cfg.num_entities - 1));
            if (object >= i) ++object;  // no self loops
            facts.push_back(Fact{static_cast<EntityId>(i), std::string(kRelations[rels[k]]), object});
        }
    }
    return KnowledgeBase(std::move(entities), std::move(facts), cfg.seed);
}

std::string kb_to_text(const KnowledgeBase& kb) {
    std::ostringstream out;
    out << "# egrpo-kb 1 seed=" << kb.seed() << '\n';
    for (const auto& e : kb.entities()) {
        out << "E " << e.id << ' ' << e.name << " | ";
        for (std::size_t i = 0; i < e.descriptors.size(); ++i) {
            if (i) out << ',';
            out << e.descriptors[i];
        }
        out << '\n';
    }
    for (const auto& f : kb.facts()) out << "F " << f.subject << ' ' << f.relation << ' ' << f.object << '\n';
    return out.str();
}

KnowledgeBase kb_from_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<Entity> entities;
    std::vector<Fact> facts;
    std::uint64_t seed = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    auto bad = [&](const std::string& why) {
        return Error(ErrorCode::Io, "kb line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            std::istringstream hs(line);
            std::string hash, magic;
            int version = 0;
            if (!(hs >> hash >> magic >> version) || hash != "#" || magic != "egrpo-kb") throw bad("missing egrpo-kb header");
            if (version != 1) throw bad("unsupported kb version " + std::to_string(version));
            const auto at = line.find("seed=");
            if (at != std::string::npos) seed = std::stoull(line.substr(at + 5));
            header_seen = true;
            continue;
        }
        if (line[0] == '#') continue;
        if (line.rfind("E ", 0) == 0) {
            const auto bar = line.find(" | ");
            if (bar == std::string::npos) throw bad("entity line without ' | '");
            std::istringstream head(line.substr(2, bar - 2));
            Entity e;
            if (!(head >> e.id)) throw bad("missing entity id");
            std::string rest;
            std::getline(head, rest);
            const auto start = rest.find_first_not_of(' ');
            if (start == std::string::npos) throw bad("missing entity name");
            e.name = rest.substr(start);
            std::istringstream descs(line.substr(bar + 3));
            std::string d;
            while (std::getline(descs, d, ',')) {
                if (!d.empty()) e.descriptors.push_back(d);
            }
            entities.push_back(std::move(e));
        } else if (line.rfind("F ", 0) == 0) {
            std::istringstream fs(line.substr(2));
            Fact f;
            if (!(fs >> f.subject >> f.relation >> f.object)) throw bad("malformed fact line");
            facts.push_back(std::move(f));
        } else {
            throw bad("unknown record type");
        }
    }
    return KnowledgeBase(std::move(entities), std::move(facts), seed);
}

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << kb_to_text(kb);
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return kb_from_text(buf.str());
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string entity_url(EntityId id) {
    return "kb://" + std::to_string(id);
}

SearchObservation tool_search(const KnowledgeBase& kb, std::span<const std::string> queries,
                              const ToolConfig& cfg, std::uint64_t seed) {
    if (cfg.top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
    SearchObservation obs;
    std::ostringstream text;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto& query = queries[q];
        auto qtok = tokenize(query);
        std::sort(qtok.begin(), qtok.end());
        qtok.erase(std::unique(qtok.begin(), qtok.end()), qtok.end());
        const std::uint64_t qseed = derive_seed({seed, fnv1a(query)});

        struct Scored {
            std::size_t score;
            std::uint64_t tie;
            EntityId id;
        };
        std::vector<Scored> scored;
        for (std::size_t i = 0; i < kb.entities().size(); ++i) {
            const auto& e = kb.entities()[i];
            const auto& etok = kb.search_tokens(i);
            std::size_t score = 0;
            for (const auto& t : qtok) {
                if (std::binary_search(etok.begin(), etok.end(), t)) ++score;
            }
            if (score > 0) scored.push_back({score, mix64(qseed ^ e.id), e.id});
        }
        std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.tie != b.tie) return a.tie < b.tie;
            return a.id < b.id;
        });
        if (scored.size() > cfg.top_k) scored.resize(cfg.top_k);

        std::vector<SearchHit> hits;
        for (const auto& s : scored) hits.push_back({s.id, s.score, qtok.size(), false});
        if (!hits.empty() && cfg.distractor_count > 0 && kb.entities().size() > hits.size()) {
            Rng rng(qseed);
            for (std::size_t d = 0; d < cfg.distractor_count; ++d) {
                for (int attempt = 0; attempt < 32; ++attempt) {
                    const EntityId id = kb.entities()[rng.below(kb.entities().size())].id;
                    const bool listed = std::any_of(hits.begin(), hits.end(), [&](const SearchHit& h) { return h.id == id; });
                    if (listed) continue;
                    const auto pos = static_cast<std::ptrdiff_t>(rng.below(hits.size() + 1));
                    hits.insert(hits.begin() + pos, SearchHit{id, 0, qtok.size(), true});
                    break;
                }
            }
        }

        if (q) text << "\n\n";
        text << "Results for \"" << query << "\":";
        if (hits.empty()) text << "\nno results";
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const auto& e = kb.entity(hits[i].id);
            text << '\n' << (i + 1) << ". " << e.name << " (" << entity_url(e.id) << ") - ";
            for (std::size_t k = 0; k < e.descriptors.size(); ++k) {
                if (k) text << ", ";
                text << e.descriptors[k];
            }
        }
        obs.hits.insert(obs.hits.end(), hits.begin(), hits.end());
    }
    obs.text = text.str();
    return obs;
}

VisitObservation tool_visit(const KnowledgeBase& kb, std::span<const EntityId> ids, std::string_view goal) {
    (void)goal;  // pages are rendered in full; the goal only shapes the tool call
    VisitObservation obs;
    std::ostringstream text;
    for (std::size_t p = 0; p < ids.size(); ++p) {
        const Entity& page = kb.entity(ids[p]);
        if (p) text << "\n\n";
        text << "Page " << entity_url(page.id) << ": " << page.name << " [";
        for (std::size_t k = 0; k < page.descriptors.size(); ++k) {
            if (k) text << ", ";
            text << page.descriptors[k];
        }
        text << ']';

        std::vector<std::size_t> all = kb.outgoing(page.id);
        const auto& in = kb.incoming(page.id);
        all.insert(all.end(), in.begin(), in.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        for (auto f : all) {
            const Fact& fact = kb.facts()[f];
            const bool outgoing = fact.subject == page.id;
            text << "\n- " << kb.entity(fact.subject).name << ' ' << fact.relation << ' ' << kb.entity(fact.object).name;
            obs.lines.push_back(FactLine{f, page.id, outgoing ? fact.object : fact.subject, fact.relation, outgoing});
        }
    }
    obs.text = text.str();
    return obs;
}

}  // namespace egrpo
