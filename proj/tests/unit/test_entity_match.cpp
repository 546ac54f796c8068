// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>

#include "egrpo/entity_match.hpp"
#include "egrpo/errors.hpp"
#include "egrpo/rollout.hpp"
#include "fixtures.hpp"
#include "properties.hpp"

using namespace egrpo;

namespace {

std::vector<std::string> transcript_thoughts(const std::string& name) {
    return thoughts_of(std::get<Rollout>(parse_rollout(testing::read_fixture(name))));
}

void require_property(const testing::PropertyResult& r) {
    INFO(r.name << ": " << r.first_failure);
    CHECK(r.ok());
}

}  // namespace

TEST_SUITE("entity_match") {

TEST_CASE("solved transcript mentions all three entities") {
    const EntitySet es = parse_entity_lines(testing::read_fixture("polar_entities.txt"));
    REQUIRE(es.size() == 3);
    const MatchReport m = match_entities(transcript_thoughts("polar_solved.txt"), es);
    CHECK(m.gamma == Rational(1));
    CHECK(m.matched == std::vector<std::size_t>{0, 1, 2});
    // Tegetthoff first shows up in round 2, the Polar Year in round 4 and
    // the curly-quoted medal only in the closing thought.
    CHECK(m.first_hit_step.at(0) == 1);
    CHECK(m.first_hit_step.at(1) == 3);
    CHECK(m.first_hit_step.at(2) == 4);
}

TEST_CASE("failed transcript misses the Polar Year") {
    const EntitySet es = parse_entity_lines(testing::read_fixture("polar_entities.txt"));
    const MatchReport m = match_entities(transcript_thoughts("polar_failed.txt"), es);
    CHECK(m.gamma == Rational(2, 3));
    CHECK(m.matched_phrases(es) ==
          std::vector<std::string>{"Tegetthoff", "Royal Geographical Society’s Founder’s Medal"});
}

TEST_CASE("empty thoughts match nothing") {
    const EntitySet es({"Leonardo"});
    const MatchReport m = match_entities({}, es);
    CHECK(m.matched.empty());
    CHECK(m.gamma == Rational(0));
}

TEST_CASE("near-miss thought") {
    const std::vector<std::string> thoughts = {"the actor is Leonardo DiCaprio"};
    CHECK(match_entities(thoughts, EntitySet({"Leonardo", "Titanic"})).gamma == Rational(1, 2));
}

TEST_CASE("empty entity set is an error") {
    const std::vector<std::string> thoughts = {"x"};
    CHECK_THROWS_AS(match_entities(thoughts, EntitySet{}), Error);
    try {
        match_entities(thoughts, EntitySet{});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyEntitySet);
    }
}

TEST_CASE("normalize_group") {
    const std::vector<Rational> a = {Rational(1, 2), Rational(1), Rational(0)};
    CHECK(normalize_group(a).gamma_hats == a);
    const std::vector<Rational> zeros(3, Rational(0));
    CHECK(normalize_group(zeros).gamma_hats == zeros);
    CHECK(normalize_group(zeros).gamma_max == Rational(0));
    const std::vector<Rational> thirds = {Rational(1, 3), Rational(2, 3)};
    CHECK(normalize_group(thirds).gamma_hats == std::vector<Rational>{Rational(1, 2), Rational(1)});
}

TEST_CASE("duplicates collapse before m is counted") {
    const EntitySet es({"Titanic", "Titanic", "Leonardo"});
    CHECK(es.size() == 2);
    const std::vector<std::string> thoughts = {"Titanic"};
    CHECK(match_entities(thoughts, es).gamma == Rational(1, 2));
}

TEST_CASE("empty phrases are rejected") {
    CHECK_THROWS_AS(EntitySet({"a", ""}), Error);
}

TEST_CASE("match options") {
    const std::vector<std::string> thoughts = {"the  titanic sank", "Leonardos"};
    CHECK(match_entities(thoughts, EntitySet({"Titanic"})).gamma == Rational(0));
    MatchConfig folded;
    folded.case_sensitive = false;
    CHECK(match_entities(thoughts, EntitySet({"Titanic"}, folded)).gamma == Rational(1));
    CHECK(match_entities(thoughts, EntitySet({"the titanic"})).gamma == Rational(0));
    MatchConfig collapse;
    collapse.whitespace_collapse = true;
    CHECK(match_entities(thoughts, EntitySet({"the titanic"}, collapse)).gamma == Rational(1));
    CHECK(match_entities(thoughts, EntitySet({"Leonardo"})).gamma == Rational(1));
    MatchConfig bounded;
    bounded.word_boundary = true;
    CHECK(match_entities(thoughts, EntitySet({"Leonardo"}, bounded)).gamma == Rational(0));
}

TEST_CASE("NFC normalization on both sides") {
    const std::vector<std::string> decomposed = {"Cafe\xCC\x81"};
    CHECK(match_entities(decomposed, EntitySet({"Caf\xC3\xA9"})).gamma == Rational(1));
    const std::vector<std::string> composed = {"Caf\xC3\xA9"};
    CHECK(match_entities(composed, EntitySet({"Cafe\xCC\x81"})).gamma == Rational(1));
}

TEST_CASE("substring entities count on their own") {
    const std::vector<std::string> thoughts = {"Polar Year"};
    CHECK(match_entities(thoughts, EntitySet({"Polar Year", "International Polar Year"})).gamma == Rational(1, 2));
}

TEST_CASE("entity file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "egrpo_entities_test.txt";
    const EntitySet es({"Tegetthoff", "International Polar Year"});
    write_entity_file(path, es);
    CHECK(read_entity_file(path).phrases() == es.phrases());
    std::filesystem::remove(path);
    CHECK(parse_entity_lines("# comment\n\nA\r\nB\n").phrases() == std::vector<std::string>{"A", "B"});
}

TEST_CASE("properties") {
    require_property(testing::prop_match_agrees_with_brute_force(300, 1));
    require_property(testing::prop_match_monotone(300, 2));
    require_property(testing::prop_gamma_range_and_argmax(300, 3));
    require_property(testing::prop_gamma_hat_scale_invariant(300, 4));
    require_property(testing::prop_thought_only(300, 5));
    require_property(testing::prop_unmatched_entity_noise(300, 6));
}

}  // TEST_SUITE
