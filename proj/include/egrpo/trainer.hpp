// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egrpo/env.hpp"
#include "egrpo/kb.hpp"
#include "egrpo/policy.hpp"
#include "egrpo/qa_synth.hpp"
#include "egrpo/reward.hpp"

namespace egrpo {

struct TrainConfig {
    std::size_t group_size = 8;
    std::size_t questions_per_batch = 64;
    // The run stops after max_steps updates, or after `epochs` passes over
    // the dataset when max_steps is 0.
    std::size_t epochs = 0;
    std::size_t max_steps = 300;
    double learning_rate = 2.0;
    RewardConfig reward;
    ClipConfig clip;
    std::uint64_t seed = 1;
    EpisodeConfig episode;
    std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints
};

/// Serialized as a flat JSON object; unknown keys are rejected.
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(std::string_view text, const TrainConfig& base = {});

struct StepMetrics {
    std::size_t step = 0;
    double train_accuracy = 0.0;  // fraction of Ok-Correct rollouts
    double mean_tool_calls = 0.0;
    double mean_gamma = 0.0;
    double mean_reward = 0.0;
    double clipped_fraction = 0.0;
    double overlength_fraction = 0.0;
    double format_error_fraction = 0.0;
    double max_ratio_dev = 0.0;  // max |r - 1| at the update; 0 when exactly on-policy
};

inline constexpr const char* kMetricsHeader =
    "step,train_accuracy,mean_tool_calls,mean_gamma,mean_reward,clipped_fraction,overlength_fraction,"
    "format_error_fraction,max_ratio_dev";

std::string metrics_csv_row(const StepMetrics& m);

/// Mean train_accuracy over the last `window` steps (all steps if fewer).
double final_accuracy(std::span<const StepMetrics> metrics, std::size_t window = 10);
double final_tool_calls(std::span<const StepMetrics> metrics, std::size_t window = 10);

struct TrainResult {
    PolicyParams params;
    std::vector<StepMetrics> metrics;
};

struct TrainHooks {
    // Called after every update with the step number (1-based) and new params.
    std::function<void(std::size_t, const PolicyParams&)> on_step;
};

/// On-policy loop: per step, G episodes for each of questions_per_batch
/// questions under the current parameters, group scoring, one surrogate
/// gradient ascent step. With `run_dir`, writes metrics.csv, config.json,
/// checkpoints/step_<n>.ckpt and final.ckpt there.
TrainResult train(const KnowledgeBase& kb, std::span<const QARecord> dataset, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                  const std::optional<PolicyParams>& initial = std::nullopt, const TrainHooks& hooks = {});

PolicyParams initial_policy(const EpisodeConfig& cfg);

/// One scored group of rollouts for one question.
struct GroupRecord {
    std::size_t question_index = 0;
    std::vector<Episode> episodes;
    GroupScore score;
};

/// G episodes per question under `agent`, scored with `reward`.
std::vector<GroupRecord> sample_groups(const KnowledgeBase& kb, std::span<const QARecord> dataset, Agent& agent,
                                       const EpisodeConfig& episode, std::size_t group_size,
                                       const RewardConfig& reward, std::uint64_t seed);

struct EvalReport {
    double pass_at_1 = 0.0;
    std::optional<double> pass_at_3;  // only when 3 rollouts were sampled
    double mean_tool_calls = 0.0;
    double mean_gamma = 0.0;
    double overlength_fraction = 0.0;
};

/// n_rollouts must be 1 or 3. pass@1 scores the first rollout of each
/// question, pass@3 any of three; the means cover every rollout.
EvalReport evaluate(const KnowledgeBase& kb, std::span<const QARecord> dataset, Agent& agent,
                    const EpisodeConfig& episode, std::size_t n_rollouts, std::uint64_t seed);
EvalReport evaluate(const KnowledgeBase& kb, std::span<const QARecord> dataset, const PolicyParams& params,
                    const EpisodeConfig& episode, std::size_t n_rollouts, std::uint64_t seed);

}  // namespace egrpo
