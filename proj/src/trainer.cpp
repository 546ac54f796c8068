// SPDX-License-Identifier: Apache-2.0
#include "egrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "egrpo/errors.hpp"
#include "egrpo/rng.hpp"

namespace egrpo {

using json = nlohmann::ordered_json;

namespace {

std::vector<RolloutOutcome> outcomes_of(const std::vector<Episode>& episodes) {
    std::vector<RolloutOutcome> out;
    out.reserve(episodes.size());
    for (const auto& ep : episodes) {
        out.push_back(RolloutOutcome{ep.rollout.status, ep.rollout.verdict, thoughts_of(ep.rollout)});
    }
    return out;
}

bool is_correct(const Episode& ep) {
    return ep.rollout.status == RolloutStatus::Ok && ep.rollout.verdict == Verdict::Correct;
}

void check_config(const TrainConfig& cfg) {
    if (cfg.group_size < 2) throw Error(ErrorCode::InvalidArgument, "group_size must be >= 2");
    if (cfg.questions_per_batch == 0) throw Error(ErrorCode::InvalidArgument, "questions_per_batch must be >= 1");
    if (cfg.max_steps == 0 && cfg.epochs == 0) throw Error(ErrorCode::InvalidArgument, "set max_steps or epochs");
    if (!(cfg.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be >= 0");
    if (!(cfg.reward.alpha >= 0.0 && cfg.reward.alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be in [0, 1]");
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["group_size"] = cfg.group_size;
    j["questions_per_batch"] = cfg.questions_per_batch;
    j["epochs"] = cfg.epochs;
    j["max_steps"] = cfg.max_steps;
    j["learning_rate"] = cfg.learning_rate;
    j["alpha"] = cfg.reward.alpha;
    j["mode"] = to_string(cfg.reward.mode);
    j["std_epsilon"] = cfg.reward.std_epsilon;
    j["gamma_max_includes_errors"] = cfg.reward.gamma_max_includes_errors;
    j["eps_low"] = cfg.clip.eps_low;
    j["eps_high"] = cfg.clip.eps_high;
    j["seed"] = cfg.seed;
    j["tool_budget"] = cfg.episode.tool_budget;
    j["top_k"] = cfg.episode.top_k;
    j["distractor_count"] = cfg.episode.distractor_count;
    j["candidate_slots"] = cfg.episode.candidate_slots;
    j["feature_dim"] = cfg.episode.feature_dim;
    j["checkpoint_every"] = cfg.checkpoint_every;
    return j.dump(2);
}

TrainConfig train_config_from_json(std::string_view text, const TrainConfig& base) {
    TrainConfig cfg = base;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key == "group_size") cfg.group_size = value.get<std::size_t>();
            else if (key == "questions_per_batch") cfg.questions_per_batch = value.get<std::size_t>();
            else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
            else if (key == "max_steps") cfg.max_steps = value.get<std::size_t>();
            else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
            else if (key == "alpha") cfg.reward.alpha = value.get<double>();
            else if (key == "mode") cfg.reward.mode = parse_reward_mode(value.get<std::string>());
            else if (key == "std_epsilon") cfg.reward.std_epsilon = value.get<double>();
            else if (key == "gamma_max_includes_errors") cfg.reward.gamma_max_includes_errors = value.get<bool>();
            else if (key == "eps_low") cfg.clip.eps_low = value.get<double>();
            else if (key == "eps_high") cfg.clip.eps_high = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "tool_budget") cfg.episode.tool_budget = value.get<std::size_t>();
            else if (key == "top_k") cfg.episode.top_k = value.get<std::size_t>();
            else if (key == "distractor_count") cfg.episode.distractor_count = value.get<std::size_t>();
            else if (key == "candidate_slots") cfg.episode.candidate_slots = value.get<std::size_t>();
            else if (key == "feature_dim") cfg.episode.feature_dim = value.get<std::size_t>();
            else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<std::size_t>();
            else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
    }
    return cfg;
}

std::string metrics_csv_row(const StepMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", m.step, m.train_accuracy,
                  m.mean_tool_calls, m.mean_gamma, m.mean_reward, m.clipped_fraction, m.overlength_fraction,
                  m.format_error_fraction, m.max_ratio_dev);
    return buf;
}

double final_accuracy(std::span<const StepMetrics> metrics, std::size_t window) {
    if (metrics.empty()) return 0.0;
    const std::size_t n = std::min(window == 0 ? metrics.size() : window, metrics.size());
    double sum = 0.0;
    for (std::size_t i = metrics.size() - n; i < metrics.size(); ++i) sum += metrics[i].train_accuracy;
    return sum / static_cast<double>(n);
}

double final_tool_calls(std::span<const StepMetrics> metrics, std::size_t window) {
    if (metrics.empty()) return 0.0;
    const std::size_t n = std::min(window == 0 ? metrics.size() : window, metrics.size());
    double sum = 0.0;
    for (std::size_t i = metrics.size() - n; i < metrics.size(); ++i) sum += metrics[i].mean_tool_calls;
    return sum / static_cast<double>(n);
}

PolicyParams initial_policy(const EpisodeConfig& cfg) {
    return PolicyParams(cfg.feature_dim, cfg.action_dim());
}

TrainResult train(const KnowledgeBase& kb, std::span<const QARecord> dataset, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& run_dir, const std::optional<PolicyParams>& initial,
                  const TrainHooks& hooks) {
    check_config(cfg);
    if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");

    TrainResult result;
    result.params = initial ? *initial : initial_policy(cfg.episode);
    if (result.params.feature_dim != cfg.episode.feature_dim || result.params.action_dim != cfg.episode.action_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "initial policy shape does not match the episode config");
    }

    std::ofstream metrics_out;
    if (run_dir) {
        std::filesystem::create_directories(*run_dir / "checkpoints");
        std::ofstream(*run_dir / "config.json", std::ios::binary) << train_config_to_json(cfg) << '\n';
        metrics_out.open(*run_dir / "metrics.csv", std::ios::binary);
        if (!metrics_out) throw Error(ErrorCode::Io, "cannot write metrics.csv in " + run_dir->string());
        metrics_out << kMetricsHeader << '\n';
    }

    const std::size_t n = dataset.size();
    const std::size_t total_steps =
        cfg.max_steps > 0 ? cfg.max_steps : (cfg.epochs * n + cfg.questions_per_batch - 1) / cfg.questions_per_batch;

    std::vector<std::size_t> order(n);
    std::size_t epoch = 0;
    std::size_t cursor = n;  // forces a shuffle on first use
    auto next_question = [&]() {
        if (cursor == n) {
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            Rng rng(derive_seed({cfg.seed, 0x6570ULL, epoch++}));
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
            cursor = 0;
        }
        return order[cursor++];
    };

    for (std::size_t step = 1; step <= total_steps; ++step) {
        // theta_old := theta; every episode of this batch samples from it.
        LogLinearAgent agent(result.params);
        std::vector<RolloutDecisions> batch;
        batch.reserve(cfg.questions_per_batch * cfg.group_size);

        StepMetrics m;
        m.step = step;
        std::size_t rollouts = 0, correct = 0, overlength = 0, format_errors = 0, tool_calls = 0;
        double gamma_sum = 0.0, reward_sum = 0.0;

        for (std::size_t qi = 0; qi < cfg.questions_per_batch; ++qi) {
            const std::size_t q = next_question();
            std::vector<Episode> episodes;
            episodes.reserve(cfg.group_size);
            for (std::size_t g = 0; g < cfg.group_size; ++g) {
                episodes.push_back(run_episode(kb, dataset[q], agent, cfg.episode, derive_seed({cfg.seed, step, qi, g})));
            }
            const GroupScore score = score_group(outcomes_of(episodes), dataset[q].entity_set, cfg.reward);
            for (std::size_t g = 0; g < cfg.group_size; ++g) {
                const Episode& ep = episodes[g];
                const ScoredRollout& s = score.per_rollout[g];
                ++rollouts;
                correct += is_correct(ep);
                overlength += ep.rollout.status == RolloutStatus::Overlength;
                format_errors += ep.rollout.status == RolloutStatus::FormatError;
                tool_calls += ep.tool_calls;
                gamma_sum += to_double(s.gamma);
                reward_sum += s.reward;
                batch.push_back(RolloutDecisions{std::move(episodes[g].decisions), s.advantage, s.in_loss});
            }
        }
        const double inv = 1.0 / static_cast<double>(rollouts);
        m.train_accuracy = static_cast<double>(correct) * inv;
        m.mean_tool_calls = static_cast<double>(tool_calls) * inv;
        m.mean_gamma = gamma_sum * inv;
        m.mean_reward = reward_sum * inv;
        m.overlength_fraction = static_cast<double>(overlength) * inv;
        m.format_error_fraction = static_cast<double>(format_errors) * inv;

        try {
            const ObjectiveReport report = surrogate(result.params, batch, cfg.clip);
            m.clipped_fraction = report.clipped_fraction;
            for (double r : report.per_decision_ratio) m.max_ratio_dev = std::max(m.max_ratio_dev, std::abs(r - 1.0));
            result.params = sgd_step(result.params, report.gradient, cfg.learning_rate);
        } catch (const Error& e) {
            // A batch made only of overlength rollouts has nothing to learn from.
            if (e.code() != ErrorCode::EmptyBatch) throw;
        }

        result.metrics.push_back(m);
        if (metrics_out.is_open()) {
            metrics_out << metrics_csv_row(m) << '\n';
            metrics_out.flush();
        }
        if (run_dir && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
            save_policy(*run_dir / "checkpoints" / ("step_" + std::to_string(step) + ".ckpt"), result.params);
        }
        if (hooks.on_step) hooks.on_step(step, result.params);
    }
    if (run_dir) save_policy(*run_dir / "final.ckpt", result.params);
    return result;
}

std::vector<GroupRecord> sample_groups(const KnowledgeBase& kb, std::span<const QARecord> dataset, Agent& agent,
                                       const EpisodeConfig& episode, std::size_t group_size,
                                       const RewardConfig& reward, std::uint64_t seed) {
    if (group_size == 0) throw Error(ErrorCode::InvalidArgument, "group_size must be >= 1");
    std::vector<GroupRecord> out;
    out.reserve(dataset.size());
    for (std::size_t q = 0; q < dataset.size(); ++q) {
        GroupRecord rec;
        rec.question_index = q;
        for (std::size_t g = 0; g < group_size; ++g) {
            rec.episodes.push_back(run_episode(kb, dataset[q], agent, episode, derive_seed({seed, 0x7367ULL, q, g})));
        }
        rec.score = score_group(outcomes_of(rec.episodes), dataset[q].entity_set, reward);
        out.push_back(std::move(rec));
    }
    return out;
}

EvalReport evaluate(const KnowledgeBase& kb, std::span<const QARecord> dataset, Agent& agent,
                    const EpisodeConfig& episode, std::size_t n_rollouts, std::uint64_t seed) {
    if (n_rollouts != 1 && n_rollouts != 3) throw Error(ErrorCode::InvalidArgument, "n_rollouts must be 1 or 3");
    EvalReport report;
    if (dataset.empty()) return report;
    std::size_t first_correct = 0, any_correct = 0, rollouts = 0, tool_calls = 0, overlength = 0;
    double gamma_sum = 0.0;
    for (std::size_t q = 0; q < dataset.size(); ++q) {
        bool any = false;
        for (std::size_t k = 0; k < n_rollouts; ++k) {
            const Episode ep = run_episode(kb, dataset[q], agent, episode, derive_seed({seed, 0x6576ULL, q, k}));
            const bool ok = is_correct(ep);
            if (k == 0) first_correct += ok;
            any = any || ok;
            ++rollouts;
            tool_calls += ep.tool_calls;
            overlength += ep.rollout.status == RolloutStatus::Overlength;
            if (!dataset[q].entity_set.empty()) {
                gamma_sum += to_double(match_entities(thoughts_of(ep.rollout), dataset[q].entity_set).gamma);
            }
        }
        any_correct += any;
    }
    const double nq = static_cast<double>(dataset.size());
    const double nr = static_cast<double>(rollouts);
    report.pass_at_1 = static_cast<double>(first_correct) / nq;
    if (n_rollouts == 3) report.pass_at_3 = static_cast<double>(any_correct) / nq;
    report.mean_tool_calls = static_cast<double>(tool_calls) / nr;
    report.mean_gamma = gamma_sum / nr;
    report.overlength_fraction = static_cast<double>(overlength) / nr;
    return report;
}

EvalReport evaluate(const KnowledgeBase& kb, std::span<const QARecord> dataset, const PolicyParams& params,
                    const EpisodeConfig& episode, std::size_t n_rollouts, std::uint64_t seed) {
    LogLinearAgent agent(params);
    return evaluate(kb, dataset, agent, episode, n_rollouts, seed);
}

}  // namespace egrpo
