// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"

#include <algorithm>

namespace egrpo::testing {

namespace {

constexpr std::string_view kBodyChars = "abcdefgh XYZ.,;:'\"{}[]\n\t0123";
constexpr std::string_view kWordChars = "abcdefghijklmnopqrstuvwxyz0123456789";

}  // namespace

std::string random_text(Rng& rng, std::string_view alphabet, std::size_t min_len, std::size_t max_len) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
    return s;
}

Rollout random_rollout(Rng& rng) {
    Rollout r;
    const std::size_t tools = rng.below(6);
    for (std::size_t i = 0; i < tools; ++i) {
        Step s;
        s.thought = random_text(rng, kBodyChars, 0, 40);
        if (rng.coin(0.5)) {
            SearchAction a;
            const std::size_t n = 1 + rng.below(3);
            for (std::size_t q = 0; q < n; ++q) a.queries.push_back(random_text(rng, kBodyChars, 0, 20));
            s.action = a;
        } else {
            VisitAction a;
            const std::size_t n = 1 + rng.below(2);
            for (std::size_t u = 0; u < n; ++u) a.urls.push_back("kb://" + std::to_string(rng.below(1000)));
            a.goal = random_text(rng, kBodyChars, 1, 20);
            s.action = a;
        }
        s.observation = random_text(rng, kBodyChars, 0, 60);
        r.steps.push_back(std::move(s));
    }
    Step last;
    last.thought = random_text(rng, kBodyChars, 0, 40);
    last.action = AnswerAction{random_text(rng, kWordChars, 1, 12)};
    r.steps.push_back(std::move(last));
    r.decision_count = r.steps.size();
    return r;
}

std::vector<std::string> random_phrases(Rng& rng, std::size_t m) {
    std::vector<std::string> out;
    while (out.size() < m) {
        std::string p = random_text(rng, "abc d", 1, 4);
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
    }
    return out;
}

std::vector<std::string> random_thoughts(Rng& rng, const std::vector<std::string>& phrases) {
    std::vector<std::string> out(rng.below(4));
    for (auto& t : out) {
        t = random_text(rng, "abcdxyz ", 0, 6);
        for (const auto& p : phrases) {
            if (rng.coin(0.3)) t += p + random_text(rng, "xyz ", 0, 3);
        }
    }
    return out;
}

std::vector<RolloutOutcome> random_group(Rng& rng, const std::vector<std::string>& phrases, std::size_t g) {
    std::vector<RolloutOutcome> group(g);
    for (auto& o : group) {
        const auto pick = rng.below(10);
        if (pick == 0) {
            o.status = RolloutStatus::FormatError;
        } else if (pick == 1) {
            o.status = RolloutStatus::Overlength;
        } else {
            o.status = RolloutStatus::Ok;
            o.verdict = rng.coin(0.4) ? Verdict::Correct : Verdict::Wrong;
        }
        o.thoughts = random_thoughts(rng, phrases);
    }
    return group;
}

RandomBatch random_batch(Rng& rng, const BatchShape& shape) {
    RandomBatch b;
    const std::size_t f = shape.min_features + rng.below(shape.max_features - shape.min_features + 1);
    const std::size_t a = shape.min_actions + rng.below(shape.max_actions - shape.min_actions + 1);
    b.params = PolicyParams(f, a);
    for (auto& t : b.params.theta) t = 2.0 * rng.uniform() - 1.0;
    const std::size_t n = 1 + rng.below(shape.max_rollouts);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        RolloutDecisions r;
        r.advantage = 4.0 * rng.uniform() - 2.0;
        r.in_loss = !rng.coin(shape.mask_probability);
        const std::size_t k = 1 + rng.below(shape.max_decisions);
        for (std::size_t j = 0; j < k; ++j) {
            DecisionRecord d;
            d.features.resize(f);
            for (auto& x : d.features) x = 2.0 * rng.uniform() - 1.0;
            d.action_index = rng.below(a);
            const double shift = shape.log_ratio_spread * (2.0 * rng.uniform() - 1.0);
            d.old_logprob = std::min(0.0, logprob(b.params, d.features, d.action_index) - shift);
            r.decisions.push_back(std::move(d));
        }
        any = any || r.in_loss;
        b.rollouts.push_back(std::move(r));
    }
    if (!any) b.rollouts.front().in_loss = true;
    return b;
}

}  // namespace egrpo::testing
