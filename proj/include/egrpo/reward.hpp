// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egrpo/entity_match.hpp"
#include "egrpo/rollout.hpp"

namespace egrpo {

enum class RewardMode { EGRPO, GRPO };

std::string_view to_string(RewardMode mode) noexcept;
RewardMode parse_reward_mode(std::string_view text);

struct RewardConfig {
    double alpha = 0.3;
    RewardMode mode = RewardMode::EGRPO;
    // Below this population std every advantage in the group is 0.
    double std_epsilon = 1e-6;
    // Whether FormatError/Overlength rollouts take part in gamma_max.
    bool gamma_max_includes_errors = true;
};

/// What the reward engine needs to know about one rollout of a group.
struct RolloutOutcome {
    RolloutStatus status = RolloutStatus::Ok;
    std::optional<Verdict> verdict;
    std::vector<std::string> thoughts;
};

struct ScoredRollout {
    Rational gamma;
    Rational gamma_hat;
    double reward = 0.0;
    double advantage = 0.0;
    bool in_loss = true;
};

struct GroupScore {
    std::vector<ScoredRollout> per_rollout;
    double mean_reward = 0.0;
    double std_reward = 0.0;
};

/// 1 for a correct answer, alpha * gamma_hat for a wrong one (0 in GRPO
/// mode), 0 for any error status. Throws InvalidVerdict when the verdict is
/// missing on an Ok rollout or present on an error rollout.
double reward_of(RolloutStatus status, std::optional<Verdict> verdict, const Rational& gamma_hat,
                 const RewardConfig& cfg);

struct AdvantageStats {
    std::vector<double> advantages;
    double mean = 0.0;
    double std = 0.0;  // population
};

/// (R_i - mean) / std over the whole group, or all zeros when std < epsilon.
AdvantageStats group_advantages(std::span<const double> rewards, double std_epsilon);

/// Match, normalize, reward and normalize again. Overlength rollouts are
/// counted in mean/std but get in_loss = false.
GroupScore score_group(std::span<const RolloutOutcome> rollouts, const EntitySet& es, const RewardConfig& cfg);

}  // namespace egrpo
