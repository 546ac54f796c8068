// SPDX-License-Identifier: Apache-2.0
// Seeded random inputs for property tests.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "egrpo/policy.hpp"
#include "egrpo/reward.hpp"
#include "egrpo/rng.hpp"
#include "egrpo/rollout.hpp"

namespace egrpo::testing {

std::string random_text(Rng& rng, std::string_view alphabet, std::size_t min_len, std::size_t max_len);

/// An Ok rollout of 1..6 steps ending in an answer. Bodies avoid '<' and
/// '>', answers carry no surrounding whitespace.
Rollout random_rollout(Rng& rng);

/// `m` distinct phrases over a small alphabet so that they collide with
/// random thought text often enough to be interesting.
std::vector<std::string> random_phrases(Rng& rng, std::size_t m);

/// Thoughts that each embed a random subset of `phrases` among filler.
std::vector<std::string> random_thoughts(Rng& rng, const std::vector<std::string>& phrases);

/// A group of G outcomes with random status, verdict and thoughts.
std::vector<RolloutOutcome> random_group(Rng& rng, const std::vector<std::string>& phrases, std::size_t g);

struct RandomBatch {
    PolicyParams params;
    std::vector<RolloutDecisions> rollouts;
};

struct BatchShape {
    std::size_t min_features = 2, max_features = 6;
    std::size_t min_actions = 2, max_actions = 5;
    std::size_t max_rollouts = 4;
    std::size_t max_decisions = 4;
    // old_logprob = current logprob - U(-spread, spread), so ratios land in
    // [e^-spread, e^spread].
    double log_ratio_spread = 0.6;
    double mask_probability = 0.25;
};

/// A batch with at least one unmasked decision.
RandomBatch random_batch(Rng& rng, const BatchShape& shape = {});

}  // namespace egrpo::testing
