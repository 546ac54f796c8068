// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace egrpo {

/// Log-linear policy parameters: logits = features^T * theta, theta is
/// [feature_dim x action_dim], row-major. Also used for gradients.
struct PolicyParams {
    std::size_t feature_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> theta;

    PolicyParams() = default;
    PolicyParams(std::size_t features, std::size_t actions)
        : feature_dim(features), action_dim(actions), theta(features * actions, 0.0) {}

    double& at(std::size_t f, std::size_t a) { return theta[f * action_dim + a]; }
    double at(std::size_t f, std::size_t a) const { return theta[f * action_dim + a]; }

    bool operator==(const PolicyParams&) const = default;
};

/// One sampled decision (one "token" of the objective).
struct DecisionRecord {
    std::vector<double> features;
    std::size_t action_index = 0;
    double old_logprob = 0.0;  // under the sampling policy
};

struct ClipConfig {
    double eps_low = 0.2;
    double eps_high = 0.28;
};

/// Decisions of one rollout with its broadcast group-relative advantage.
struct RolloutDecisions {
    std::vector<DecisionRecord> decisions;
    double advantage = 0.0;
    bool in_loss = true;
};

struct ObjectiveReport {
    double objective_value = 0.0;
    PolicyParams gradient;
    std::vector<double> per_decision_ratio;  // unmasked decisions, in order
    double clipped_fraction = 0.0;
    std::size_t unmasked_decisions = 0;
};

/// Full log-softmax over actions at one decision.
std::vector<double> log_softmax(const PolicyParams& params, std::span<const double> features);

double logprob(const PolicyParams& params, std::span<const double> features, std::size_t action_index);

/// Token-mean clipped surrogate, no KL term:
///   J = 1/N * sum over unmasked decisions of min(r*A, clip(r, 1-eps_low, 1+eps_high)*A)
/// with r = exp(logprob - old_logprob) and N the unmasked decision count.
/// The gradient is exact; a decision whose clipped branch is strictly the
/// minimum contributes no gradient.
ObjectiveReport surrogate(const PolicyParams& params, std::span<const RolloutDecisions> rollouts,
                          const ClipConfig& clip);

/// theta + lr * gradient (ascent).
PolicyParams sgd_step(const PolicyParams& params, const PolicyParams& gradient, double lr);

/// Versioned text checkpoint: "egrpo-policy 1", then "<F> <A>", then F rows
/// of A values printed with 17 significant digits.
void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);
std::string policy_to_text(const PolicyParams& params);
PolicyParams policy_from_text(const std::string& text);

}  // namespace egrpo
