// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egrpo/entity_match.hpp"
#include "egrpo/rollout.hpp"
#include "egrpo/trainer.hpp"

namespace egrpo {

inline constexpr std::size_t kHistogramBins = 21;
using Histogram = std::array<std::size_t, kHistogramBins>;

/// Bin of gamma_hat in [0, 1]: round(20 * gamma_hat), half up, exact.
std::size_t histogram_bin(const Rational& gamma_hat);

/// One rollout of an episode dump.
struct RolloutRecord {
    std::string question_id;
    std::size_t rollout = 0;
    RolloutStatus status = RolloutStatus::Ok;
    std::optional<Verdict> verdict;
    Rational gamma;
    Rational gamma_hat;
    // Same match computed over the whole trajectory (thoughts, tool calls and
    // observations) instead of the thoughts alone.
    Rational trajectory_gamma;
    Rational trajectory_gamma_hat;
    std::size_t tool_calls = 0;

    bool correct() const noexcept { return status == RolloutStatus::Ok && verdict == Verdict::Correct; }
};

struct QuestionRollouts {
    std::string question_id;
    std::vector<RolloutRecord> rollouts;
};

struct ComparisonCounts {
    std::size_t n_correct_higher = 0;
    std::size_t n_incorrect_higher = 0;
    std::size_t n_ties = 0;
};

struct CorrelationReport {
    // Per question with at least one correct and one incorrect rollout:
    // which side has the higher mean gamma.
    std::size_t n_correct_higher = 0;
    std::size_t n_incorrect_higher = 0;
    std::size_t n_ties = 0;
    Histogram histogram_correct{};
    Histogram histogram_incorrect{};
    // The same statistics with trajectory-wide matching.
    ComparisonCounts trajectory;
    Histogram trajectory_histogram_correct{};
    Histogram trajectory_histogram_incorrect{};
};

CorrelationReport analyze_correlation(std::span<const QuestionRollouts> questions);

/// Flatten sampled groups into dump records (gamma_hat is per group).
std::vector<QuestionRollouts> dump_groups(std::span<const GroupRecord> groups, std::span<const QARecord> dataset);

/// CSV with header
/// question_id,rollout,status,verdict,gamma,gamma_hat,trajectory_gamma,trajectory_gamma_hat,tool_calls
/// where the rationals are written exactly as "p/q".
std::string dump_to_csv(std::span<const QuestionRollouts> questions);
std::vector<QuestionRollouts> dump_from_csv(std::string_view text);

std::string correlation_to_csv(const CorrelationReport& report);

struct AblationRow {
    double alpha = 0.0;
    std::uint64_t seed = 0;
    double final_train_accuracy = 0.0;
    double final_tool_calls = 0.0;
    EvalReport eval;
};

struct AblationReport {
    std::vector<double> alpha_grid;
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;  // alpha-major, then seed

    /// Median of final_train_accuracy over seeds for one alpha.
    double median_accuracy(double alpha) const;
};

inline const std::vector<double> kDefaultAlphaGrid = {0.0, 0.1, 0.3, 0.5};

/// Train and evaluate every (alpha, seed) cell. alpha = 0 runs as E-GRPO
/// with alpha 0, which is the GRPO reduction. With `out_dir`, each cell gets
/// its own run directory alpha_<a>/seed_<s>.
AblationReport run_ablation(const KnowledgeBase& kb, std::span<const QARecord> dataset, const TrainConfig& base,
                            std::span<const double> alpha_grid, std::span<const std::uint64_t> seeds,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string ablation_to_csv(const AblationReport& report);

double median(std::vector<double> values);

}  // namespace egrpo
