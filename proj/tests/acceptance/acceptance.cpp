// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Artifacts go to --out.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egrpo/analysis.hpp"
#include "egrpo/errors.hpp"
#include "egrpo/policy.hpp"
#include "egrpo/reward.hpp"
#include "egrpo/trainer.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace egrpo;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-5;
constexpr std::size_t kFdInstances = 100;
constexpr std::size_t kPropertyCases = 1000;
constexpr std::size_t kMinFixtures = 20;
constexpr std::size_t kSnapshotStep = 150;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

int g_failures = 0;

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void report(const char* id, bool pass, const std::string& detail, double seconds) {
    if (!pass) ++g_failures;
    std::cout << id << ' ' << (pass ? "PASS" : "FAIL") << "  " << detail << "  [" << fmt(seconds, 1) << " s]"
              << std::endl;
}

std::string sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---- A1 --------------------------------------------------------------------

void check_fixtures() {
    Stopwatch sw;
    const auto fixtures = testing::load_reward_fixtures();
    std::size_t failed = 0;
    std::string first;
    for (const auto& f : fixtures) {
        const std::string why = testing::check_reward_fixture(f);
        if (!why.empty()) {
            if (first.empty()) first = f.name + ": " + why;
            ++failed;
        }
    }
    const bool pass = fixtures.size() >= kMinFixtures && failed == 0;
    report("A1", pass,
           "reward fixtures: " + std::to_string(fixtures.size() - failed) + "/" + std::to_string(fixtures.size()) +
               " exact (need >= " + std::to_string(kMinFixtures) + ")" + (first.empty() ? "" : "; " + first),
           sw.seconds());
}

// ---- A2 --------------------------------------------------------------------

bool near_clip_boundary(const testing::RandomBatch& b, const ClipConfig& clip) {
    for (const auto& r : b.rollouts) {
        for (const auto& d : r.decisions) {
            const double ratio = std::exp(logprob(b.params, d.features, d.action_index) - d.old_logprob);
            if (std::abs(ratio - (1.0 - clip.eps_low)) < 1e-3 || std::abs(ratio - (1.0 + clip.eps_high)) < 1e-3) {
                return true;
            }
        }
    }
    return false;
}

void check_gradient() {
    Stopwatch sw;
    const ClipConfig clip;
    Rng rng(20240);
    testing::BatchShape shape;
    shape.log_ratio_spread = 0.5;
    double worst = 0.0;
    std::size_t clipped = 0, unclipped = 0, positive = 0, negative = 0, masked = 0;
    for (std::size_t i = 0; i < kFdInstances; ++i) {
        testing::RandomBatch b = testing::random_batch(rng, shape);
        while (near_clip_boundary(b, clip)) b = testing::random_batch(rng, shape);
        const ObjectiveReport rep = surrogate(b.params, b.rollouts, clip);
        worst = std::max(worst, testing::max_relative_error(rep.gradient, testing::fd_gradient(b.params, b.rollouts, clip, kFdStep)));
        for (const auto& r : b.rollouts) {
            if (!r.in_loss) {
                ++masked;
                continue;
            }
            if (r.advantage > 0) ++positive;
            if (r.advantage < 0) ++negative;
        }
        for (double ratio : rep.per_decision_ratio) {
            if (ratio < 1.0 - clip.eps_low || ratio > 1.0 + clip.eps_high) ++clipped;
            else ++unclipped;
        }
    }
    const bool coverage = clipped && unclipped && positive && negative && masked;
    report("A2", worst < kFdRelTol && coverage,
           "FD gradient over " + std::to_string(kFdInstances) + " batches: max rel err " + sci(worst) +
               " (tol 1e-5); decisions outside/inside clip range " + std::to_string(clipped) + "/" +
               std::to_string(unclipped) + ", rollouts A>0/A<0/masked " + std::to_string(positive) + "/" +
               std::to_string(negative) + "/" + std::to_string(masked),
           sw.seconds());
}

// ---- A3/A4/A5/A9 share the reference world ----------------------------------

struct Reference {
    KnowledgeBase kb;
    std::vector<QARecord> ds;
};

Reference reference_world() {
    Reference r;
    r.kb = generate_world(WorldConfig{});
    r.ds = synth_dataset(r.kb, DatasetConfig{});
    return r;
}

TrainConfig reference_config(RewardMode mode, double alpha, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.reward.mode = mode;
    cfg.reward.alpha = alpha;
    cfg.seed = seed;
    return cfg;
}

struct SeedResult {
    double accuracy = 0.0;
    double tool_calls = 0.0;
};

void check_training(const Reference& ref, const fs::path& out, PolicyParams& snapshot) {
    Stopwatch sw;
    std::vector<SeedResult> e, g;
    std::ostringstream csv;
    csv << "seed,mode,final_train_accuracy,final_tool_calls\n";
    for (auto seed : kSeeds) {
        TrainHooks hooks;
        if (seed == kSeeds.front()) {
            hooks.on_step = [&](std::size_t step, const PolicyParams& p) {
                if (step == kSnapshotStep) snapshot = p;
            };
        }
        const auto te = train(ref.kb, ref.ds, reference_config(RewardMode::EGRPO, 0.3, seed),
                              out / "training" / ("egrpo_seed_" + std::to_string(seed)), std::nullopt, hooks);
        const auto tg = train(ref.kb, ref.ds, reference_config(RewardMode::GRPO, 0.0, seed),
                              out / "training" / ("grpo_seed_" + std::to_string(seed)));
        e.push_back({final_accuracy(te.metrics), final_tool_calls(te.metrics)});
        g.push_back({final_accuracy(tg.metrics), final_tool_calls(tg.metrics)});
        csv << seed << ",egrpo," << e.back().accuracy << ',' << e.back().tool_calls << '\n';
        csv << seed << ",grpo," << g.back().accuracy << ',' << g.back().tool_calls << '\n';
    }
    write_file(out / "training" / "summary.csv", csv.str());
    auto med = [](const std::vector<SeedResult>& v, double SeedResult::*field) {
        std::vector<double> x;
        for (const auto& s : v) x.push_back(s.*field);
        return median(x);
    };
    const double acc_e = med(e, &SeedResult::accuracy), acc_g = med(g, &SeedResult::accuracy);
    const double calls_e = med(e, &SeedResult::tool_calls), calls_g = med(g, &SeedResult::tool_calls);
    std::size_t wins = 0;
    for (std::size_t i = 0; i < e.size(); ++i) wins += e[i].accuracy > g[i].accuracy;
    const bool pass = acc_e >= acc_g && calls_e <= calls_g && wins >= 3;
    report("A3", pass,
           "median final accuracy E-GRPO " + fmt(acc_e) + " vs GRPO " + fmt(acc_g) + ", median tool calls " +
               fmt(calls_e, 3) + " vs " + fmt(calls_g, 3) + ", E-GRPO wins " + std::to_string(wins) + "/5 seeds",
           sw.seconds());
}

void check_correlation(const Reference& ref, const PolicyParams& snapshot, const fs::path& out) {
    Stopwatch sw;
    if (snapshot.theta.empty()) {
        report("A4", false, "no step-" + std::to_string(kSnapshotStep) + " checkpoint was captured", sw.seconds());
        return;
    }
    fs::create_directories(out / "correlation");
    save_policy(out / "correlation" / "step_150.ckpt", snapshot);
    LogLinearAgent agent(snapshot);
    const TrainConfig cfg = reference_config(RewardMode::EGRPO, 0.3, 1);
    const auto groups = sample_groups(ref.kb, ref.ds, agent, cfg.episode, cfg.group_size, cfg.reward, 31337);
    const auto dump = dump_groups(groups, ref.ds);
    const CorrelationReport r = analyze_correlation(dump);
    write_file(out / "correlation" / "dump.csv", dump_to_csv(dump));
    write_file(out / "correlation" / "correlation.csv", correlation_to_csv(r));
    report("A4", r.n_correct_higher > r.n_incorrect_higher,
           "step-150 E-GRPO checkpoint: n_correct_higher " + std::to_string(r.n_correct_higher) +
               " vs n_incorrect_higher " + std::to_string(r.n_incorrect_higher) + " (ties " +
               std::to_string(r.n_ties) + "; trajectory-wide " + std::to_string(r.trajectory.n_correct_higher) +
               " vs " + std::to_string(r.trajectory.n_incorrect_higher) + ")",
           sw.seconds());
}

void check_ablation(const Reference& ref, const fs::path& out) {
    Stopwatch sw;
    const std::vector<double> grid = {0.0, 0.3, 0.5};
    const AblationReport rep = run_ablation(ref.kb, ref.ds, TrainConfig{}, grid, kSeeds);
    write_file(out / "ablation" / "ablation.csv", ablation_to_csv(rep));
    const double a0 = rep.median_accuracy(0.0), a3 = rep.median_accuracy(0.3), a5 = rep.median_accuracy(0.5);
    report("A5", a3 >= a0,
           "median final accuracy alpha=0.0 " + fmt(a0) + ", alpha=0.3 " + fmt(a3) + ", alpha=0.5 " + fmt(a5) +
               " (0.5 unconstrained)",
           sw.seconds());
}

void check_determinism(const Reference& ref, const fs::path& out) {
    Stopwatch sw;
    const TrainConfig cfg = reference_config(RewardMode::EGRPO, 0.3, 7);
    const fs::path a = out / "determinism" / "run_a", b = out / "determinism" / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);
    train(ref.kb, ref.ds, cfg, a);
    train(ref.kb, ref.ds, cfg, b);
    const std::string x = slurp(a / "metrics.csv"), y = slurp(b / "metrics.csv");
    const bool pass = !x.empty() && x == y && slurp(a / "final.ckpt") == slurp(b / "final.ckpt");
    report("A9", pass,
           "two runs of the same config: metrics.csv " + std::to_string(x.size()) + " bytes, " +
               (x == y ? "identical" : "different") + "; final checkpoints " +
               (slurp(a / "final.ckpt") == slurp(b / "final.ckpt") ? "identical" : "different"),
           sw.seconds());
}

// ---- A6/A7 -----------------------------------------------------------------

// On-policy decisions for `n` rollouts under `params`.
std::vector<RolloutDecisions> decisions_for(const PolicyParams& params, std::size_t n, Rng& rng) {
    std::vector<RolloutDecisions> out(n);
    for (auto& r : out) {
        const std::size_t steps = 2 + rng.below(3);
        for (std::size_t s = 0; s < steps; ++s) {
            DecisionRecord d;
            for (std::size_t f = 0; f < params.feature_dim; ++f) d.features.push_back(rng.uniform() * 2.0 - 1.0);
            d.action_index = rng.below(params.action_dim);
            d.old_logprob = logprob(params, d.features, d.action_index);
            r.decisions.push_back(std::move(d));
        }
    }
    return out;
}

PolicyParams random_params(Rng& rng, std::size_t f, std::size_t a) {
    PolicyParams p(f, a);
    for (auto& x : p.theta) x = rng.uniform() - 0.5;
    return p;
}

void check_all_wrong() {
    Stopwatch sw;
    const EntitySet es({"Vienna", "Danube", "Strauss"});
    std::vector<RolloutOutcome> group = {
        {RolloutStatus::Ok, Verdict::Wrong, {"Vienna on the Danube, home of Strauss"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"Vienna and the Danube"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"somewhere near Vienna"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"no idea"}},
    };
    Rng rng(6);
    const PolicyParams params = random_params(rng, 5, 4);
    auto batch = decisions_for(params, group.size(), rng);
    auto gradient_for = [&](RewardMode mode) {
        RewardConfig cfg;
        cfg.mode = mode;
        const GroupScore s = score_group(group, es, cfg);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            batch[i].advantage = s.per_rollout[i].advantage;
            batch[i].in_loss = s.per_rollout[i].in_loss;
        }
        return surrogate(params, batch, ClipConfig{}).gradient;
    };
    const PolicyParams ge = gradient_for(RewardMode::EGRPO);
    const PolicyParams gg = gradient_for(RewardMode::GRPO);
    double norm_e = 0.0;
    for (double x : ge.theta) norm_e += x * x;
    const bool grpo_zero = std::all_of(gg.theta.begin(), gg.theta.end(), [](double x) { return x == 0.0; });
    const GroupScore se = score_group(group, es, RewardConfig{});
    std::string hats;
    for (const auto& r : se.per_rollout) hats += (hats.empty() ? "" : ", ") + to_string(r.gamma_hat);
    report("A6", norm_e > 0.0 && grpo_zero,
           "all-wrong group with gamma_hat [" + hats + "]: E-GRPO gradient norm " + fmt(std::sqrt(norm_e), 6) +
               ", GRPO gradient " + (grpo_zero ? "exactly zero" : "nonzero"),
           sw.seconds());
}

void check_overlength() {
    Stopwatch sw;
    const EntitySet es({"Vienna", "Danube", "Strauss"});
    std::vector<RolloutOutcome> group = {
        {RolloutStatus::Ok, Verdict::Correct, {"Vienna on the Danube"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"Strauss in Vienna"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"nothing"}},
        {RolloutStatus::Ok, Verdict::Correct, {"the Danube"}},
        {RolloutStatus::Ok, Verdict::Wrong, {"Danube"}},
    };
    constexpr std::size_t kToggled = 1;
    const GroupScore before = score_group(group, es, RewardConfig{});
    group[kToggled].status = RolloutStatus::Overlength;
    group[kToggled].verdict.reset();
    const GroupScore after = score_group(group, es, RewardConfig{});

    bool others_changed = false;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (i != kToggled && before.per_rollout[i].advantage != after.per_rollout[i].advantage) others_changed = true;
    }
    Rng rng(7);
    const PolicyParams params = random_params(rng, 5, 4);
    auto batch = decisions_for(params, group.size(), rng);
    // Push the ratios off 1 so both clip branches are in play.
    for (auto& r : batch) {
        for (auto& d : r.decisions) d.old_logprob -= rng.uniform() * 0.8 - 0.4;
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].advantage = after.per_rollout[i].advantage;
        batch[i].in_loss = after.per_rollout[i].in_loss;
    }
    auto without = batch;
    without.erase(without.begin() + kToggled);
    const ObjectiveReport with_masked = surrogate(params, batch, ClipConfig{});
    const ObjectiveReport deleted = surrogate(params, without, ClipConfig{});
    const bool zero_contribution = !after.per_rollout[kToggled].in_loss &&
                                   with_masked.objective_value == deleted.objective_value &&
                                   with_masked.gradient == deleted.gradient;
    report("A7", others_changed && zero_contribution,
           std::string("toggling rollout 1 to overlength: other advantages ") + (others_changed ? "changed" : "unchanged") +
               ", masked objective/gradient " + (zero_contribution ? "identical to deleting it" : "differ from deleting it"),
           sw.seconds());
}

// ---- A8 --------------------------------------------------------------------

void check_invariants(const fs::path& out) {
    Stopwatch sw;
    std::size_t total = 0, failed = 0, min_cases = SIZE_MAX;
    std::ostringstream log;
    std::string first;
    std::uint64_t seed = 1000;
    for (const auto& p : testing::invariant_suite()) {
        const auto r = p.run(kPropertyCases, seed++);
        ++total;
        min_cases = std::min(min_cases, r.cases);
        log << p.module << ',' << p.name << ',' << r.cases << ',' << r.failures << '\n';
        if (!r.ok() || r.cases < kPropertyCases) {
            ++failed;
            if (first.empty()) first = "; first failure " + p.module + "/" + p.name + ": " + r.first_failure;
        }
    }
    write_file(out / "invariants.csv", "module,property,cases,failures\n" + log.str());
    report("A8", failed == 0,
           std::to_string(total - failed) + "/" + std::to_string(total) + " properties hold, >= " +
               std::to_string(min_cases) + " cases each" + first,
           sw.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("acceptance checks");
    std::string out_dir = "acceptance-out";
    bool skip_training = false;
    app.add_option("--out", out_dir, "directory for artifacts");
    app.add_flag("--skip-training", skip_training, "skip the training-based checks A3, A4, A5 and A9");
    CLI11_PARSE(app, argc, argv);
    const fs::path out(out_dir);
    fs::create_directories(out);

    // An exception fails its own criterion and the run carries on.
    const auto guarded = [](const char* id, const std::function<void()>& check) {
        try {
            check();
        } catch (const std::exception& e) {
            report(id, false, std::string("aborted: ") + e.what(), 0.0);
        }
    };
    guarded("A1", check_fixtures);
    guarded("A2", check_gradient);
    guarded("A6", check_all_wrong);
    guarded("A7", check_overlength);
    guarded("A8", [&] { check_invariants(out); });
    if (!skip_training) {
        const Reference ref = reference_world();
        PolicyParams snapshot;
        guarded("A3", [&] { check_training(ref, out, snapshot); });
        guarded("A4", [&] { check_correlation(ref, snapshot, out); });
        guarded("A5", [&] { check_ablation(ref, out); });
        guarded("A9", [&] { check_determinism(ref, out); });
    }
    std::cout << (g_failures ? "FAILED " + std::to_string(g_failures) + " criteria" : std::string("all criteria passed"))
              << std::endl;
    return g_failures ? 1 : 0;
}
