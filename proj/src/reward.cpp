// SPDX-License-Identifier: Apache-2.0
#include "egrpo/reward.hpp"

#include <cmath>

#include "egrpo/errors.hpp"

namespace egrpo {

std::string_view to_string(RewardMode mode) noexcept {
    return mode == RewardMode::EGRPO ? "egrpo" : "grpo";
}

RewardMode parse_reward_mode(std::string_view text) {
    if (text == "egrpo" || text == "EGRPO" || text == "e-grpo") return RewardMode::EGRPO;
    if (text == "grpo" || text == "GRPO") return RewardMode::GRPO;
    throw Error(ErrorCode::InvalidArgument, "unknown reward mode '" + std::string(text) + "'");
}

double reward_of(RolloutStatus status, std::optional<Verdict> verdict, const Rational& gamma_hat,
                 const RewardConfig& cfg) {
    if (status != RolloutStatus::Ok) {
        if (verdict) throw Error(ErrorCode::InvalidVerdict, "verdict given for a rollout with error status");
        return 0.0;
    }
    if (!verdict) throw Error(ErrorCode::InvalidVerdict, "verdict missing on an ok rollout");
    if (*verdict == Verdict::Correct) return 1.0;
    if (cfg.mode == RewardMode::GRPO) return 0.0;
    return cfg.alpha * to_double(gamma_hat);
}

AdvantageStats group_advantages(std::span<const double> rewards, double std_epsilon) {
    AdvantageStats out;
    out.advantages.assign(rewards.size(), 0.0);
    if (rewards.empty()) return out;
    const auto n = static_cast<double>(rewards.size());
    double sum = 0.0;
    for (double r : rewards) sum += r;
    out.mean = sum / n;
    double sq = 0.0;
    for (double r : rewards) sq += (r - out.mean) * (r - out.mean);
    out.std = std::sqrt(sq / n);
    if (out.std < std_epsilon) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        out.advantages[i] = (rewards[i] - out.mean) / out.std;
    }
    return out;
}

GroupScore score_group(std::span<const RolloutOutcome> rollouts, const EntitySet& es, const RewardConfig& cfg) {
    GroupScore score;
    std::vector<Rational> gammas;
    gammas.reserve(rollouts.size());
    for (const auto& r : rollouts) gammas.push_back(match_entities(r.thoughts, es).gamma);

    GroupGamma group;
    if (cfg.gamma_max_includes_errors) {
        group = normalize_group(gammas);
    } else {
        std::vector<Rational> ok_only;
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
            ok_only.push_back(rollouts[i].status == RolloutStatus::Ok ? gammas[i] : Rational(0));
        }
        const Rational max_ok = normalize_group(ok_only).gamma_max;
        group.gammas = gammas;
        group.gamma_max = max_ok;
        for (const auto& g : gammas) {
            group.gamma_hats.push_back(max_ok > 0 ? std::min(Rational(1), g / max_ok) : Rational(0));
        }
    }

    std::vector<double> rewards;
    rewards.reserve(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        rewards.push_back(reward_of(rollouts[i].status, rollouts[i].verdict, group.gamma_hats[i], cfg));
    }
    const AdvantageStats stats = group_advantages(rewards, cfg.std_epsilon);

    score.mean_reward = stats.mean;
    score.std_reward = stats.std;
    score.per_rollout.reserve(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        ScoredRollout s;
        s.gamma = gammas[i];
        s.gamma_hat = group.gamma_hats[i];
        s.reward = rewards[i];
        s.advantage = stats.advantages[i];
        s.in_loss = rollouts[i].status != RolloutStatus::Overlength;
        score.per_rollout.push_back(s);
    }
    return score;
}

}  // namespace egrpo
