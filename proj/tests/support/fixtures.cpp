// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egrpo/rollout.hpp"

namespace egrpo::testing {

namespace {

using json = nlohmann::json;

Rational rational_from(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

RolloutOutcome outcome_from(const json& j) {
    RolloutOutcome o;
    std::optional<Rollout> parsed;
    if (j.contains("file") || j.contains("raw")) {
        const std::string raw = j.contains("file") ? read_fixture(j["file"]) : j["raw"].get<std::string>();
        auto result = parse_rollout(raw);
        if (auto* r = std::get_if<Rollout>(&result)) {
            o.thoughts = thoughts_of(*r);
            o.status = r->status;
        } else {
            o.status = RolloutStatus::FormatError;
        }
    } else {
        const std::string status = j.at("status");
        o.status = status == "ok" ? RolloutStatus::Ok
                   : status == "overlength" ? RolloutStatus::Overlength
                                            : RolloutStatus::FormatError;
        o.thoughts = j.at("thoughts").get<std::vector<std::string>>();
    }
    if (j.contains("verdict")) o.verdict = j["verdict"] == "correct" ? Verdict::Correct : Verdict::Wrong;
    return o;
}

template <class T>
std::string show(const std::vector<T>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "[") << v[i];
    s << ']';
    return s.str();
}

}  // namespace

std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(EGRPO_FIXTURE_DIR) / name;
}

std::string read_fixture(const std::string& name) {
    std::ifstream in(fixture_path(name), std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture " + name);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<RewardFixture> load_reward_fixtures() {
    const json all = json::parse(read_fixture("reward_groups.json"));
    std::vector<RewardFixture> out;
    for (const auto& g : all) {
        RewardFixture f;
        f.name = g.at("name");
        f.cfg.alpha = g.at("alpha");
        f.cfg.mode = parse_reward_mode(g.at("mode").get<std::string>());
        f.entities = g.contains("entity_file") ? parse_entity_lines(read_fixture(g["entity_file"]))
                                               : EntitySet(g.at("entities").get<std::vector<std::string>>());
        for (const auto& r : g.at("rollouts")) f.rollouts.push_back(outcome_from(r));
        const json& e = g.at("expect");
        for (const auto& s : e.at("gammas")) f.gammas.push_back(rational_from(s));
        for (const auto& s : e.at("gamma_hats")) f.gamma_hats.push_back(rational_from(s));
        f.rewards = e.at("rewards").get<std::vector<double>>();
        if (e.contains("advantages")) f.advantages = e["advantages"].get<std::vector<double>>();
        if (e.contains("in_loss")) f.in_loss = e["in_loss"].get<std::vector<bool>>();
        out.push_back(std::move(f));
    }
    return out;
}

std::string check_reward_fixture(const RewardFixture& f) {
    const GroupScore s = score_group(f.rollouts, f.entities, f.cfg);
    if (s.per_rollout.size() != f.rollouts.size()) return "wrong result count";
    std::vector<Rational> gammas, hats;
    std::vector<double> rewards, advantages;
    std::vector<bool> in_loss;
    for (const auto& r : s.per_rollout) {
        gammas.push_back(r.gamma);
        hats.push_back(r.gamma_hat);
        rewards.push_back(r.reward);
        advantages.push_back(r.advantage);
        in_loss.push_back(r.in_loss);
    }
    if (gammas != f.gammas) return "gammas " + show(gammas) + " expected " + show(f.gammas);
    if (hats != f.gamma_hats) return "gamma_hats " + show(hats) + " expected " + show(f.gamma_hats);
    if (rewards != f.rewards) return "rewards " + show(rewards) + " expected " + show(f.rewards);
    // Advantages go through (r - mean) / std in double, so they get a pinned
    // absolute tolerance; everything above is compared exactly.
    const auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!(std::abs(a[i] - b[i]) <= kAdvantageTolerance)) return false;
        }
        return true;
    };
    if (f.advantages && !close(advantages, *f.advantages)) {
        return "advantages " + show(advantages) + " expected " + show(*f.advantages);
    }
    if (f.in_loss && in_loss != *f.in_loss) return "in_loss mismatch";
    return {};
}

}  // namespace egrpo::testing
