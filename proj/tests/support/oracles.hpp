// SPDX-License-Identifier: Apache-2.0
// Reference implementations used only by tests. They share no code with the
// library beyond its data types.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "egrpo/kb.hpp"
#include "egrpo/policy.hpp"
#include "egrpo/qa_synth.hpp"

namespace egrpo::testing {

/// log softmax of features^T theta in long double, by direct summation.
std::vector<long double> log_softmax_ld(const PolicyParams& params, std::span<const double> features);

/// The clipped token-mean objective, evaluated in long double.
long double surrogate_ld(const PolicyParams& params, std::span<const RolloutDecisions> rollouts,
                         const ClipConfig& clip);

/// Central differences of surrogate_ld. Each coordinate uses the step that
/// was actually representable, (theta+h) - (theta-h).
PolicyParams fd_gradient(const PolicyParams& params, std::span<const RolloutDecisions> rollouts,
                         const ClipConfig& clip, double h = 1e-5);

/// Worst |a - f| / max(|a|, |f|) over coordinates where |f| > floor.
double max_relative_error(const PolicyParams& analytic, const PolicyParams& numeric, double floor = 1e-8);

/// Byte-wise substring scan: flags[k] is true iff phrases[k] occurs in some
/// thought. No normalization, so callers feed ASCII.
std::vector<bool> brute_match(std::span<const std::string> thoughts, std::span<const std::string> phrases);

/// Every entity satisfying the question, found by scanning the raw fact list
/// for each hop. The anchor is resolved from its name or by checking each
/// entity's descriptors.
std::vector<EntityId> brute_solve(const KnowledgeBase& kb, const QARecord& qa);

}  // namespace egrpo::testing
