// SPDX-License-Identifier: Apache-2.0
#include "egrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "egrpo/errors.hpp"

namespace egrpo {

namespace {

void check_shape(const PolicyParams& params, std::span<const double> features) {
    if (features.size() != params.feature_dim || params.theta.size() != params.feature_dim * params.action_dim) {
        throw Error(ErrorCode::ShapeMismatch, "feature vector has " + std::to_string(features.size()) +
                                                  " entries, policy expects " + std::to_string(params.feature_dim));
    }
}

}  // namespace

std::vector<double> log_softmax(const PolicyParams& params, std::span<const double> features) {
    check_shape(params, features);
    const std::size_t A = params.action_dim;
    std::vector<double> logits(A, 0.0);
    for (std::size_t f = 0; f < params.feature_dim; ++f) {
        const double x = features[f];
        if (x == 0.0) continue;
        const double* row = params.theta.data() + f * A;
        for (std::size_t a = 0; a < A; ++a) logits[a] += x * row[a];
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    const double log_z = top + std::log(z);
    for (double& l : logits) l -= log_z;
    return logits;
}

double logprob(const PolicyParams& params, std::span<const double> features, std::size_t action_index) {
    if (action_index >= params.action_dim) {
        throw Error(ErrorCode::ShapeMismatch, "action index " + std::to_string(action_index) + " out of range");
    }
    return log_softmax(params, features)[action_index];
}

ObjectiveReport surrogate(const PolicyParams& params, std::span<const RolloutDecisions> rollouts,
                          const ClipConfig& clip) {
    std::size_t total = 0;
    for (const auto& r : rollouts) {
        if (r.in_loss) total += r.decisions.size();
    }
    if (total == 0) throw Error(ErrorCode::EmptyBatch, "no unmasked decisions in batch");

    ObjectiveReport report;
    report.gradient = PolicyParams(params.feature_dim, params.action_dim);
    report.unmasked_decisions = total;
    report.per_decision_ratio.reserve(total);

    const double inv_n = 1.0 / static_cast<double>(total);
    const double lo = 1.0 - clip.eps_low;
    const double hi = 1.0 + clip.eps_high;
    const std::size_t A = params.action_dim;
    std::size_t clipped = 0;
    double sum = 0.0;
    std::vector<double> probs(A);

    for (const auto& rollout : rollouts) {
        if (!rollout.in_loss) continue;
        const double adv = rollout.advantage;
        for (const auto& d : rollout.decisions) {
            if (d.action_index >= A) throw Error(ErrorCode::ShapeMismatch, "action index out of range");
            const std::vector<double> lp = log_softmax(params, d.features);
            const double ratio = std::exp(lp[d.action_index] - d.old_logprob);
            report.per_decision_ratio.push_back(ratio);

            const double unclipped = ratio * adv;
            const double clipped_value = std::clamp(ratio, lo, hi) * adv;
            if (clipped_value < unclipped) {
                ++clipped;
                sum += clipped_value;
                continue;  // constant in theta
            }
            sum += unclipped;
            if (adv == 0.0) continue;

            // d(r*A)/d theta[f][a] = A * r * x_f * (1[a == k] - p_a)
            const double coef = adv * ratio * inv_n;
            for (std::size_t a = 0; a < A; ++a) probs[a] = std::exp(lp[a]);
            for (std::size_t f = 0; f < params.feature_dim; ++f) {
                const double x = d.features[f];
                if (x == 0.0) continue;
                double* g = report.gradient.theta.data() + f * A;
                const double cx = coef * x;
                for (std::size_t a = 0; a < A; ++a) g[a] -= cx * probs[a];
                g[d.action_index] += cx;
            }
        }
    }
    report.objective_value = sum * inv_n;
    report.clipped_fraction = static_cast<double>(clipped) * inv_n;
    return report;
}

PolicyParams sgd_step(const PolicyParams& params, const PolicyParams& gradient, double lr) {
    if (gradient.feature_dim != params.feature_dim || gradient.action_dim != params.action_dim ||
        gradient.theta.size() != params.theta.size()) {
        throw Error(ErrorCode::ShapeMismatch, "gradient shape differs from parameters");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::InvalidArgument, "learning rate must be >= 0");
    for (double g : gradient.theta) {
        if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "gradient has a non-finite entry");
    }
    PolicyParams next = params;
    if (lr == 0.0) return next;
    for (std::size_t i = 0; i < next.theta.size(); ++i) next.theta[i] += lr * gradient.theta[i];
    return next;
}

std::string policy_to_text(const PolicyParams& params) {
    std::string out = "egrpo-policy 1\n";
    out += std::to_string(params.feature_dim) + " " + std::to_string(params.action_dim) + "\n";
    char buf[32];
    for (std::size_t f = 0; f < params.feature_dim; ++f) {
        for (std::size_t a = 0; a < params.action_dim; ++a) {
            std::snprintf(buf, sizeof buf, "%.17g", params.at(f, a));
            if (a > 0) out += ' ';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

PolicyParams policy_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "egrpo-policy" || version != 1) {
        throw Error(ErrorCode::Io, "not an egrpo-policy v1 checkpoint");
    }
    std::size_t features = 0;
    std::size_t actions = 0;
    if (!(in >> features >> actions) || features == 0 || actions == 0) {
        throw Error(ErrorCode::Io, "bad checkpoint shape header");
    }
    PolicyParams params(features, actions);
    for (double& v : params.theta) {
        std::string token;
        if (!(in >> token)) throw Error(ErrorCode::Io, "truncated checkpoint");
        v = std::strtod(token.c_str(), nullptr);
    }
    return params;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
        out << policy_to_text(params);
    }
    std::filesystem::rename(tmp, path);
}

PolicyParams load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return policy_from_text(buf.str());
}

}  // namespace egrpo
