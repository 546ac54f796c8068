// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "properties.hpp"

TEST_SUITE("properties") {

// The acceptance run uses at least 1000 cases per property; this is the quick pass.
TEST_CASE("invariant suite, short run") {
    for (const auto& p : egrpo::testing::invariant_suite()) {
        const auto r = p.run(150, 2024);
        INFO(p.module << "/" << r.name << ": " << r.first_failure);
        CHECK(r.cases >= 150);
        CHECK(r.ok());
    }
}

TEST_CASE("rollout format properties") {
    for (auto* fn : {&egrpo::testing::prop_rollout_round_trip, &egrpo::testing::prop_delimiter_deletion_rejected}) {
        const auto r = fn(500, 9);
        INFO(r.name << ": " << r.first_failure);
        CHECK(r.ok());
    }
}

}  // TEST_SUITE
