// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace egrpo {

using Rational = boost::rational<std::int64_t>;

double to_double(const Rational& r) noexcept;
std::string to_string(const Rational& r);

/// How a ground-truth phrase is compared against thought text. Text is
/// always NFC-normalized; the defaults are plain exact substring matching.
struct MatchConfig {
    bool case_sensitive = true;
    bool whitespace_collapse = false;
    // Require non-alphanumeric characters (or text edges) around a match.
    bool word_boundary = false;

    bool operator==(const MatchConfig&) const = default;
};

/// Apply the comparison normalization of `config` to `text`.
std::string normalize_text(std::string_view text, const MatchConfig& config);

/// The ground-truth entities retained for one question. Phrases are
/// deduplicated after normalization; original spellings are kept for output.
class EntitySet {
public:
    EntitySet() = default;
    explicit EntitySet(std::vector<std::string> phrases, MatchConfig config = {});

    std::size_t size() const noexcept { return phrases_.size(); }
    bool empty() const noexcept { return phrases_.empty(); }
    const std::vector<std::string>& phrases() const noexcept { return phrases_; }
    const std::vector<std::string>& normalized() const noexcept { return normalized_; }
    const MatchConfig& config() const noexcept { return config_; }

    /// Same phrases with one more entity appended (no-op if it is a duplicate).
    EntitySet with(std::string phrase) const;

private:
    std::vector<std::string> phrases_;
    std::vector<std::string> normalized_;
    MatchConfig config_;
};

struct MatchReport {
    std::vector<std::size_t> matched;  // indices into EntitySet, ascending
    Rational gamma;
    std::map<std::size_t, std::size_t> first_hit_step;  // entity index -> thought index

    std::vector<std::string> matched_phrases(const EntitySet& es) const;
};

/// Entity e is matched iff some thought contains e as a contiguous substring
/// (under the set's MatchConfig). gamma = |matched| / m, exact.
MatchReport match_entities(std::span<const std::string> thoughts, const EntitySet& es);

struct GroupGamma {
    std::vector<Rational> gammas;
    Rational gamma_max;
    std::vector<Rational> gamma_hats;
};

/// gamma_hat_i = gamma_i / max_j gamma_j, or 0 for every rollout when the
/// maximum is 0.
GroupGamma normalize_group(std::span<const Rational> gammas);

/// Entity-set file: one phrase per line, UTF-8, blank and '#' lines ignored.
EntitySet read_entity_file(const std::filesystem::path& path, MatchConfig config = {});
EntitySet parse_entity_lines(std::string_view text, MatchConfig config = {});
void write_entity_file(const std::filesystem::path& path, const EntitySet& es);

}  // namespace egrpo
