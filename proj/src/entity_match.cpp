// SPDX-License-Identifier: Apache-2.0
#include "egrpo/entity_match.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "egrpo/errors.hpp"

namespace egrpo {

namespace {

const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* instance = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || instance == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "ICU NFC normalizer unavailable");
    }
    return *instance;
}

bool all_ascii(std::string_view text) noexcept {
    return std::all_of(text.begin(), text.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

icu::UnicodeString to_nfc(const icu::UnicodeString& text) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString out = nfc().normalize(text, status);
    if (U_FAILURE(status)) throw Error(ErrorCode::InvalidArgument, "NFC normalization failed");
    return out;
}

bool is_word_char_before(std::string_view text, std::size_t pos) {
    if (pos == 0) return false;
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_PREV(reinterpret_cast<const uint8_t*>(text.data()), 0, i, c);
    return c >= 0 && u_isalnum(c);
}

bool is_word_char_at(std::string_view text, std::size_t pos) {
    if (pos >= text.size()) return false;
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_NEXT(reinterpret_cast<const uint8_t*>(text.data()), i, static_cast<int32_t>(text.size()), c);
    return c >= 0 && u_isalnum(c);
}

bool contains(std::string_view haystack, std::string_view needle, bool word_boundary) {
    std::size_t from = 0;
    for (;;) {
        const std::size_t at = haystack.find(needle, from);
        if (at == std::string_view::npos) return false;
        if (!word_boundary) return true;
        if (!is_word_char_before(haystack, at) && !is_word_char_at(haystack, at + needle.size())) return true;
        from = at + 1;
    }
}

std::string trim_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    return std::string(line);
}

}  // namespace

double to_double(const Rational& r) noexcept {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string normalize_text(std::string_view text, const MatchConfig& config) {
    if (config.case_sensitive && !config.whitespace_collapse && all_ascii(text)) {
        return std::string(text);  // ASCII is already NFC
    }
    icu::UnicodeString u = to_nfc(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));
    if (!config.case_sensitive) {
        u.foldCase();
        u = to_nfc(u);
    }
    if (config.whitespace_collapse) {
        icu::UnicodeString collapsed;
        bool in_space = false;
        for (int32_t i = 0; i < u.length();) {
            const UChar32 c = u.char32At(i);
            i += U16_LENGTH(c);
            if (u_isUWhiteSpace(c)) {
                if (!in_space) collapsed.append(static_cast<UChar>(0x20));
                in_space = true;
            } else {
                collapsed.append(c);
                in_space = false;
            }
        }
        u = collapsed;
    }
    std::string out;
    u.toUTF8String(out);
    return out;
}

EntitySet::EntitySet(std::vector<std::string> phrases, MatchConfig config) : config_(config) {
    for (auto& phrase : phrases) {
        std::string norm = normalize_text(phrase, config_);
        if (norm.empty()) throw Error(ErrorCode::InvalidArgument, "empty entity phrase");
        if (std::find(normalized_.begin(), normalized_.end(), norm) != normalized_.end()) continue;
        normalized_.push_back(std::move(norm));
        phrases_.push_back(std::move(phrase));
    }
}

EntitySet EntitySet::with(std::string phrase) const {
    auto phrases = phrases_;
    phrases.push_back(std::move(phrase));
    return EntitySet(std::move(phrases), config_);
}

std::vector<std::string> MatchReport::matched_phrases(const EntitySet& es) const {
    std::vector<std::string> out;
    out.reserve(matched.size());
    for (auto i : matched) out.push_back(es.phrases().at(i));
    return out;
}

MatchReport match_entities(std::span<const std::string> thoughts, const EntitySet& es) {
    if (es.empty()) throw Error(ErrorCode::EmptyEntitySet, "entity set is empty");
    MatchReport report;
    std::vector<std::string> normalized;
    normalized.reserve(thoughts.size());
    for (const auto& t : thoughts) normalized.push_back(normalize_text(t, es.config()));

    for (std::size_t e = 0; e < es.size(); ++e) {
        const auto& needle = es.normalized()[e];
        for (std::size_t t = 0; t < normalized.size(); ++t) {
            if (contains(normalized[t], needle, es.config().word_boundary)) {
                report.matched.push_back(e);
                report.first_hit_step.emplace(e, t);
                break;
            }
        }
    }
    report.gamma = Rational(static_cast<std::int64_t>(report.matched.size()), static_cast<std::int64_t>(es.size()));
    return report;
}

GroupGamma normalize_group(std::span<const Rational> gammas) {
    GroupGamma out;
    out.gammas.assign(gammas.begin(), gammas.end());
    out.gamma_max = Rational(0);
    for (const auto& g : gammas) out.gamma_max = std::max(out.gamma_max, g);
    out.gamma_hats.reserve(gammas.size());
    for (const auto& g : gammas) {
        out.gamma_hats.push_back(out.gamma_max > 0 ? g / out.gamma_max : Rational(0));
    }
    return out;
}

EntitySet parse_entity_lines(std::string_view text, MatchConfig config) {
    std::vector<std::string> phrases;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string trimmed = trim_line(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        phrases.push_back(std::move(trimmed));
    }
    return EntitySet(std::move(phrases), config);
}

EntitySet read_entity_file(const std::filesystem::path& path, MatchConfig config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open entity file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_entity_lines(buf.str(), config);
}

void write_entity_file(const std::filesystem::path& path, const EntitySet& es) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write entity file " + path.string());
    for (const auto& p : es.phrases()) out << p << '\n';
}

}  // namespace egrpo
