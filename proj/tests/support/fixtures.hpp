// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egrpo/entity_match.hpp"
#include "egrpo/reward.hpp"

namespace egrpo::testing {

inline constexpr double kAdvantageTolerance = 1e-12;

std::filesystem::path fixture_path(const std::string& name);
std::string read_fixture(const std::string& name);

/// One hand-built group from reward_groups.json with its expected values.
struct RewardFixture {
    std::string name;
    RewardConfig cfg;
    EntitySet entities;
    std::vector<RolloutOutcome> rollouts;
    std::vector<Rational> gammas;
    std::vector<Rational> gamma_hats;
    std::vector<double> rewards;
    std::optional<std::vector<double>> advantages;
    std::optional<std::vector<bool>> in_loss;
};

std::vector<RewardFixture> load_reward_fixtures();

/// Empty when score_group reproduces gamma, gamma_hat, reward and in_loss
/// exactly and the advantages within kAdvantageTolerance, otherwise a
/// description of the first mismatch.
std::string check_reward_fixture(const RewardFixture& f);

}  // namespace egrpo::testing
