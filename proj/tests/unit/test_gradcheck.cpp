// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lsr/gradcheck.hpp"
#include "oracles.hpp"

using namespace lsr;
using lsr::testing::random_tensor;

TEST(GradCheck, ExactOnSquare) {
    Var<double> x = Var<double>::parameter(random_tensor<double>(Shape{1, 1, 3, 3}, 1));
    const Forward64 good = [&] { return std::vector<Var<double>>{ad::mul(x, x)}; };
    const GradCheckReport ok = grad_check("square", good, {{"x", x}});
    EXPECT_TRUE(ok.passed()) << ok.max_rel_error;
    EXPECT_EQ(ok.entries, 9u);
    EXPECT_LT(ok.max_rel_error, 1e-8);
}

TEST(GradCheck, SuitePasses) {
    const auto reports = run_gradcheck_suite();
    EXPECT_GE(reports.size(), 10u);
    for (const auto& r : reports) {
        EXPECT_TRUE(r.passed()) << r.name << " worst " << r.worst_entry << " rel " << r.max_rel_error
                                << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
        EXPECT_GT(r.entries, 0u) << r.name;
    }
}
