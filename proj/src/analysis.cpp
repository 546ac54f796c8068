// SPDX-License-Identifier: Apache-2.0
#include "egrpo/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "egrpo/errors.hpp"
#include "egrpo/rng.hpp"

namespace egrpo {

namespace {

Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return Rational(std::stoll(text));
        return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
    } catch (const std::exception&) {
        throw Error(ErrorCode::Io, "bad rational '" + text + "'");
    }
}

RolloutStatus parse_status(const std::string& s) {
    if (s == "ok") return RolloutStatus::Ok;
    if (s == "format_error") return RolloutStatus::FormatError;
    if (s == "overlength") return RolloutStatus::Overlength;
    throw Error(ErrorCode::Io, "bad status '" + s + "'");
}

std::optional<Verdict> parse_verdict(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "correct") return Verdict::Correct;
    if (s == "wrong") return Verdict::Wrong;
    throw Error(ErrorCode::Io, "bad verdict '" + s + "'");
}

// Tally one question: compare mean gamma of correct vs incorrect rollouts.
void compare(const std::vector<Rational>& correct, const std::vector<Rational>& incorrect, ComparisonCounts& out) {
    if (correct.empty() || incorrect.empty()) return;
    Rational a(0), b(0);
    for (const auto& g : correct) a += g;
    for (const auto& g : incorrect) b += g;
    a /= static_cast<std::int64_t>(correct.size());
    b /= static_cast<std::int64_t>(incorrect.size());
    if (a > b) ++out.n_correct_higher;
    else if (b > a) ++out.n_incorrect_higher;
    else ++out.n_ties;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t histogram_bin(const Rational& gamma_hat) {
    const auto n = gamma_hat.numerator();
    const auto d = gamma_hat.denominator();
    if (n <= 0) return 0;
    const auto bin = (40 * n + d) / (2 * d);
    return static_cast<std::size_t>(std::min<std::int64_t>(bin, kHistogramBins - 1));
}

CorrelationReport analyze_correlation(std::span<const QuestionRollouts> questions) {
    CorrelationReport report;
    for (const auto& q : questions) {
        std::vector<Rational> thought_c, thought_i, traj_c, traj_i;
        for (const auto& r : q.rollouts) {
            if (r.correct()) {
                thought_c.push_back(r.gamma);
                traj_c.push_back(r.trajectory_gamma);
                ++report.histogram_correct[histogram_bin(r.gamma_hat)];
                ++report.trajectory_histogram_correct[histogram_bin(r.trajectory_gamma_hat)];
            } else {
                thought_i.push_back(r.gamma);
                traj_i.push_back(r.trajectory_gamma);
                ++report.histogram_incorrect[histogram_bin(r.gamma_hat)];
                ++report.trajectory_histogram_incorrect[histogram_bin(r.trajectory_gamma_hat)];
            }
        }
        ComparisonCounts counts;
        compare(thought_c, thought_i, counts);
        report.n_correct_higher += counts.n_correct_higher;
        report.n_incorrect_higher += counts.n_incorrect_higher;
        report.n_ties += counts.n_ties;
        compare(traj_c, traj_i, report.trajectory);
    }
    return report;
}

std::vector<QuestionRollouts> dump_groups(std::span<const GroupRecord> groups, std::span<const QARecord> dataset) {
    std::vector<QuestionRollouts> out;
    out.reserve(groups.size());
    for (const auto& group : groups) {
        const QARecord& qa = dataset[group.question_index];
        QuestionRollouts q;
        q.question_id = qa.id;
        std::vector<Rational> traj;
        for (const auto& ep : group.episodes) {
            traj.push_back(match_entities(trajectory_texts_of(ep.rollout), qa.entity_set).gamma);
        }
        const GroupGamma traj_norm = normalize_group(traj);
        for (std::size_t i = 0; i < group.episodes.size(); ++i) {
            const Episode& ep = group.episodes[i];
            RolloutRecord r;
            r.question_id = qa.id;
            r.rollout = i;
            r.status = ep.rollout.status;
            r.verdict = ep.rollout.verdict;
            r.gamma = group.score.per_rollout[i].gamma;
            r.gamma_hat = group.score.per_rollout[i].gamma_hat;
            r.trajectory_gamma = traj[i];
            r.trajectory_gamma_hat = traj_norm.gamma_hats[i];
            r.tool_calls = ep.tool_calls;
            q.rollouts.push_back(std::move(r));
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::string dump_to_csv(std::span<const QuestionRollouts> questions) {
    std::ostringstream out;
    out << "question_id,rollout,status,verdict,gamma,gamma_hat,trajectory_gamma,trajectory_gamma_hat,tool_calls\n";
    for (const auto& q : questions) {
        for (const auto& r : q.rollouts) {
            out << r.question_id << ',' << r.rollout << ',' << to_string(r.status) << ','
                << (r.verdict ? to_string(*r.verdict) : std::string_view()) << ',' << to_string(r.gamma) << ','
                << to_string(r.gamma_hat) << ',' << to_string(r.trajectory_gamma) << ','
                << to_string(r.trajectory_gamma_hat) << ',' << r.tool_calls << '\n';
        }
    }
    return out.str();
}

std::vector<QuestionRollouts> dump_from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::vector<QuestionRollouts> out;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 || line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 9) throw Error(ErrorCode::Io, "dump line " + std::to_string(line_no) + ": expected 9 fields");
        RolloutRecord r;
        r.question_id = cells[0];
        r.rollout = std::stoul(cells[1]);
        r.status = parse_status(cells[2]);
        r.verdict = parse_verdict(cells[3]);
        r.gamma = parse_rational(cells[4]);
        r.gamma_hat = parse_rational(cells[5]);
        r.trajectory_gamma = parse_rational(cells[6]);
        r.trajectory_gamma_hat = parse_rational(cells[7]);
        r.tool_calls = std::stoul(cells[8]);
        if (out.empty() || out.back().question_id != r.question_id) out.push_back(QuestionRollouts{r.question_id, {}});
        out.back().rollouts.push_back(std::move(r));
    }
    return out;
}

std::string correlation_to_csv(const CorrelationReport& report) {
    std::ostringstream out;
    out << "# n_correct_higher=" << report.n_correct_higher << " n_incorrect_higher=" << report.n_incorrect_higher
        << " n_ties=" << report.n_ties << '\n';
    out << "# trajectory n_correct_higher=" << report.trajectory.n_correct_higher
        << " n_incorrect_higher=" << report.trajectory.n_incorrect_higher << " n_ties=" << report.trajectory.n_ties
        << '\n';
    out << "bin,gamma_hat,correct,incorrect,trajectory_correct,trajectory_incorrect\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        out << b << ',' << fmt(static_cast<double>(b) / 20.0) << ',' << report.histogram_correct[b] << ','
            << report.histogram_incorrect[b] << ',' << report.trajectory_histogram_correct[b] << ','
            << report.trajectory_histogram_incorrect[b] << '\n';
    }
    return out.str();
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double AblationReport::median_accuracy(double alpha) const {
    std::vector<double> acc;
    for (const auto& row : rows) {
        if (row.alpha == alpha) acc.push_back(row.final_train_accuracy);
    }
    return median(std::move(acc));
}

AblationReport run_ablation(const KnowledgeBase& kb, std::span<const QARecord> dataset, const TrainConfig& base,
                            std::span<const double> alpha_grid, std::span<const std::uint64_t> seeds,
                            const std::optional<std::filesystem::path>& out_dir) {
    if (alpha_grid.empty()) throw Error(ErrorCode::InvalidArgument, "alpha grid is empty");
    if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "no seeds given");
    AblationReport report;
    report.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
    report.seeds.assign(seeds.begin(), seeds.end());
    for (double alpha : alpha_grid) {
        for (auto seed : seeds) {
            TrainConfig cfg = base;
            cfg.reward.alpha = alpha;
            cfg.reward.mode = RewardMode::EGRPO;
            cfg.seed = seed;
            std::optional<std::filesystem::path> dir;
            if (out_dir) dir = *out_dir / ("alpha_" + fmt(alpha)) / ("seed_" + std::to_string(seed));
            const TrainResult result = train(kb, dataset, cfg, dir);
            AblationRow row;
            row.alpha = alpha;
            row.seed = seed;
            row.final_train_accuracy = final_accuracy(result.metrics);
            row.final_tool_calls = final_tool_calls(result.metrics);
            row.eval = evaluate(kb, dataset, result.params, cfg.episode, 3, derive_seed({seed, 0x6576ULL}));
            report.rows.push_back(row);
        }
    }
    return report;
}

std::string ablation_to_csv(const AblationReport& report) {
    std::ostringstream out;
    out << "alpha,seed,final_train_accuracy,final_tool_calls,pass_at_1,pass_at_3,mean_tool_calls,mean_gamma,"
           "overlength_fraction\n";
    for (const auto& r : report.rows) {
        out << fmt(r.alpha) << ',' << r.seed << ',' << fmt(r.final_train_accuracy) << ',' << fmt(r.final_tool_calls)
            << ',' << fmt(r.eval.pass_at_1) << ',' << fmt(r.eval.pass_at_3.value_or(0.0)) << ','
            << fmt(r.eval.mean_tool_calls) << ',' << fmt(r.eval.mean_gamma) << ',' << fmt(r.eval.overlength_fraction)
            << '\n';
    }
    return out.str();
}

}  // namespace egrpo
