// SPDX-License-Identifier: Apache-2.0
// egrpo: synthesis, training, evaluation, scoring, serving and analysis.
#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "egrpo/analysis.hpp"
#include "egrpo/entity_match.hpp"
#include "egrpo/errors.hpp"
#include "egrpo/qa_synth.hpp"
#include "egrpo/reward.hpp"
#include "egrpo/service.hpp"
#include "egrpo/trainer.hpp"

namespace fs = std::filesystem;
using namespace egrpo;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::vector<T> split_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::istringstream is(item);
        T v{};
        if (!(is >> v)) throw Error(ErrorCode::InvalidArgument, "bad list item '" + item + "'");
        out.push_back(v);
    }
    return out;
}

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    bool seed_set = false;
    std::string out = "egrpo-out";
};

TrainConfig load_train_config(const Globals& g) {
    TrainConfig cfg;
    if (!g.config.empty()) cfg = train_config_from_json(read_file(g.config), cfg);
    if (g.seed_set) cfg.seed = g.seed;
    return cfg;
}

std::string eval_json(const EvalReport& r) {
    std::string s = "{\"pass_at_1\":" + fmt(r.pass_at_1);
    if (r.pass_at_3) s += ",\"pass_at_3\":" + fmt(*r.pass_at_3);
    s += ",\"mean_tool_calls\":" + fmt(r.mean_tool_calls) + ",\"mean_gamma\":" + fmt(r.mean_gamma) +
         ",\"overlength_fraction\":" + fmt(r.overlength_fraction) + "}";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entity-aware group-relative policy optimization toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON training config");
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s; g.seed_set = true; }, "Run seed");
    app.add_option("--out", g.out, "Output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a knowledge base and a QA dataset");
    WorldConfig world;
    DatasetConfig data;
    synth->add_option("--entities", world.num_entities, "Entities in the world")->capture_default_str();
    synth->add_option("--questions", data.num_questions, "Questions to synthesize")->capture_default_str();
    synth->add_option("--min-hops", data.min_hops)->capture_default_str();
    synth->add_option("--max-hops", data.max_hops)->capture_default_str();
    synth->add_option("--inject-fraction", data.inject_fuzz_fraction, "Share of inject/fuzz questions")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a policy");
    std::string kb_path, dataset_path, checkpoint_path;
    std::optional<std::string> mode_opt;
    std::optional<double> alpha_opt, lr_opt;
    std::optional<std::size_t> steps_opt, ckpt_every_opt;
    train_cmd->add_option("--kb", kb_path, "Knowledge base file")->required();
    train_cmd->add_option("--dataset", dataset_path, "Dataset (JSON lines)")->required();
    train_cmd->add_option("--mode", mode_opt, "egrpo or grpo");
    train_cmd->add_option("--alpha", alpha_opt, "Entity reward weight");
    train_cmd->add_option("--lr", lr_opt, "Learning rate");
    train_cmd->add_option("--steps", steps_opt, "Update steps");
    train_cmd->add_option("--checkpoint-every", ckpt_every_opt, "Checkpoint interval in steps");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::size_t n_rollouts = 3;
    eval_cmd->add_option("--kb", kb_path)->required();
    eval_cmd->add_option("--dataset", dataset_path)->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "Policy checkpoint")->required();
    eval_cmd->add_option("--rollouts", n_rollouts, "1 or 3")->capture_default_str();

    // score
    auto* score_cmd = app.add_subcommand("score", "Score one group of tag-format rollout files");
    std::string entities_path, verdicts;
    std::vector<std::string> rollout_files;
    double score_alpha = 0.3;
    std::string score_mode = "egrpo";
    score_cmd->add_option("--entities", entities_path, "Entity file, one phrase per line")->required();
    score_cmd->add_option("--verdicts", verdicts, "Comma list of correct/wrong/- per rollout");
    score_cmd->add_option("--alpha", score_alpha)->capture_default_str();
    score_cmd->add_option("--mode", score_mode)->capture_default_str();
    score_cmd->add_option("rollouts", rollout_files, "Rollout files")->required();

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the reward service");
    std::string transport = "stdio", address = "127.0.0.1:7878";
    serve_cmd->add_option("--transport", transport, "stdio or tcp")->capture_default_str();
    serve_cmd->add_option("--address", address, "host:port for tcp")->capture_default_str();

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Correlation of entity match rate and correctness");
    std::string dump_path;
    std::size_t group_size = 8;
    analyze_cmd->add_option("--kb", kb_path);
    analyze_cmd->add_option("--dataset", dataset_path);
    analyze_cmd->add_option("--checkpoint", checkpoint_path);
    analyze_cmd->add_option("--dump", dump_path, "Re-analyze an existing episodes.csv");
    analyze_cmd->add_option("--group-size", group_size)->capture_default_str();

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Alpha ablation");
    std::string alphas = "0,0.1,0.3,0.5", seeds = "1,2,3,4,5";
    ablate_cmd->add_option("--kb", kb_path)->required();
    ablate_cmd->add_option("--dataset", dataset_path)->required();
    ablate_cmd->add_option("--alphas", alphas)->capture_default_str();
    ablate_cmd->add_option("--seeds", seeds)->capture_default_str();
    ablate_cmd->add_option("--steps", steps_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: invalid_argument: " << e.what() << '\n';
        return 2;
    }

    try {
        const fs::path out = g.out;
        if (*synth) {
            world.seed = g.seed;
            data.seed = g.seed;
            const KnowledgeBase kb = generate_world(world);
            const auto dataset = synth_dataset(kb, data);
            fs::create_directories(out / "entities");
            save_kb(out / "world.kb", kb);
            save_dataset(out / "dataset.jsonl", dataset);
            for (const auto& qa : dataset) write_entity_file(out / "entities" / (qa.id + ".txt"), qa.entity_set);
            std::cout << "wrote " << kb.entities().size() << " entities, " << kb.facts().size() << " facts, "
                      << dataset.size() << " questions to " << out.string() << '\n';
        } else if (*train_cmd) {
            TrainConfig cfg = load_train_config(g);
            if (mode_opt) cfg.reward.mode = parse_reward_mode(*mode_opt);
            if (alpha_opt) cfg.reward.alpha = *alpha_opt;
            if (lr_opt) cfg.learning_rate = *lr_opt;
            if (steps_opt) cfg.max_steps = *steps_opt;
            if (ckpt_every_opt) cfg.checkpoint_every = *ckpt_every_opt;
            const KnowledgeBase kb = load_kb(kb_path);
            const auto dataset = load_dataset(dataset_path);
            const TrainResult result = train(kb, dataset, cfg, out);
            std::cout << "final_train_accuracy " << fmt(final_accuracy(result.metrics)) << "\nmean_tool_calls "
                      << fmt(final_tool_calls(result.metrics)) << "\nrun_dir " << out.string() << '\n';
        } else if (*eval_cmd) {
            const TrainConfig cfg = load_train_config(g);
            const KnowledgeBase kb = load_kb(kb_path);
            const auto dataset = load_dataset(dataset_path);
            const PolicyParams params = load_policy(checkpoint_path);
            const EvalReport report = evaluate(kb, dataset, params, cfg.episode, n_rollouts, cfg.seed);
            fs::create_directories(out);
            write_file(out / "eval.json", eval_json(report) + "\n");
            std::cout << eval_json(report) << '\n';
        } else if (*score_cmd) {
            RewardConfig cfg;
            cfg.alpha = score_alpha;
            cfg.mode = parse_reward_mode(score_mode);
            const EntitySet es = read_entity_file(entities_path);
            const auto verdict_list = split_list<std::string>(verdicts);
            if (!verdict_list.empty() && verdict_list.size() != rollout_files.size()) {
                throw Error(ErrorCode::InvalidArgument, "need one verdict per rollout file");
            }
            std::vector<RolloutOutcome> outcomes;
            for (std::size_t i = 0; i < rollout_files.size(); ++i) {
                RolloutOutcome o;
                const ParseResult parsed = parse_rollout(read_file(rollout_files[i]), ParseOptions{ToolPolicy::PassThrough, true});
                if (const auto* r = std::get_if<Rollout>(&parsed)) {
                    o.status = r->status;
                    o.thoughts = thoughts_of(*r);
                } else {
                    o.status = RolloutStatus::FormatError;
                }
                const std::string v = verdict_list.empty() ? "-" : verdict_list[i];
                if (v == "correct") o.verdict = Verdict::Correct;
                else if (v == "wrong") o.verdict = Verdict::Wrong;
                else if (v != "-") throw Error(ErrorCode::InvalidArgument, "verdict must be correct, wrong or -");
                outcomes.push_back(std::move(o));
            }
            const GroupScore score = score_group(outcomes, es, cfg);
            std::cout << "file,status,gamma,gamma_hat,reward,advantage,in_loss\n";
            for (std::size_t i = 0; i < outcomes.size(); ++i) {
                const auto& s = score.per_rollout[i];
                std::cout << rollout_files[i] << ',' << to_string(outcomes[i].status) << ',' << to_string(s.gamma) << ','
                          << to_string(s.gamma_hat) << ',' << fmt(s.reward) << ',' << fmt(s.advantage) << ','
                          << (s.in_loss ? "true" : "false") << '\n';
            }
        } else if (*serve_cmd) {
            if (transport == "stdio") {
                serve_stream(std::cin, std::cout);
            } else if (transport == "tcp") {
                const auto colon = address.rfind(':');
                if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "address must be host:port");
                TcpServerOptions opts;
                opts.host = address.substr(0, colon);
                opts.port = static_cast<std::uint16_t>(std::stoul(address.substr(colon + 1)));
                opts.on_listening = [](std::uint16_t port) {
                    std::cout << "listening " << port << std::endl;
                };
                serve_tcp(opts);
            } else {
                throw Error(ErrorCode::InvalidArgument, "transport must be stdio or tcp");
            }
        } else if (*analyze_cmd) {
            std::vector<QuestionRollouts> dump;
            if (!dump_path.empty()) {
                dump = dump_from_csv(read_file(dump_path));
            } else {
                if (kb_path.empty() || dataset_path.empty() || checkpoint_path.empty()) {
                    throw Error(ErrorCode::InvalidArgument, "analyze needs --dump, or --kb, --dataset and --checkpoint");
                }
                const TrainConfig cfg = load_train_config(g);
                const KnowledgeBase kb = load_kb(kb_path);
                const auto dataset = load_dataset(dataset_path);
                const PolicyParams params = load_policy(checkpoint_path);
                LogLinearAgent agent(params);
                const auto groups = sample_groups(kb, dataset, agent, cfg.episode, group_size, cfg.reward, cfg.seed);
                dump = dump_groups(groups, dataset);
                write_file(out / "episodes.csv", dump_to_csv(dump));
            }
            const CorrelationReport report = analyze_correlation(dump);
            write_file(out / "correlation.csv", correlation_to_csv(report));
            std::cout << "n_correct_higher " << report.n_correct_higher << "\nn_incorrect_higher "
                      << report.n_incorrect_higher << "\nn_ties " << report.n_ties << '\n';
        } else if (*ablate_cmd) {
            TrainConfig cfg = load_train_config(g);
            if (steps_opt) cfg.max_steps = *steps_opt;
            const KnowledgeBase kb = load_kb(kb_path);
            const auto dataset = load_dataset(dataset_path);
            const auto grid = split_list<double>(alphas);
            const auto seed_list = split_list<std::uint64_t>(seeds);
            const AblationReport report = run_ablation(kb, dataset, cfg, grid, seed_list, out);
            write_file(out / "ablation.csv", ablation_to_csv(report));
            for (double a : grid) std::cout << "alpha " << fmt(a) << " median_accuracy " << fmt(report.median_accuracy(a)) << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal_error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
