#include <gtest/gtest.h>

#include "twopatch/analysis.hpp"
#include "twopatch/io.hpp"

using namespace twopatch;

TEST(CompareFields, IdenticalFieldsHaveZeroMargin) {
    const Field f = Field::sample(8, 8, [](double a, double b) { return a * b; });
    const ComparisonReport r = compare_fields(f, f, 0.0, "self");
    EXPECT_EQ(r.min_margin, 0.0);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.name, "self");
}

TEST(CompareFields, LocatesWorstViolation) {
    const Field lower = Field::sample(4, 4, [](double a, double b) { return a == 0.75 && b == 0.25 ? 1.0 : 0.0; });
    const Field upper(4, 4, 0.5);
    const ComparisonReport r = compare_fields(lower, upper, 0.4);
    EXPECT_DOUBLE_EQ(r.min_margin, -0.5);
    EXPECT_EQ(r.node_of_min.i, 3);
    EXPECT_EQ(r.node_of_min.k, 1);
    EXPECT_FALSE(r.passed);
    EXPECT_TRUE(compare_fields(lower, upper, 0.5).passed);
    EXPECT_THROW(compare_fields(lower, Field(8, 8), 0.1), InvariantError);
    EXPECT_THROW(compare_fields(lower, upper, -1.0), InvariantError);
}

TEST(CompareFields, EllipticTimeDominatesMergedPatchBound) {
    const int n = 128;
    const EllipticSolution s = solve_elliptic(discretize_Ld(PdeGrid(n), 0.5, 1.0));
    const ComparisonReport r = compare_fields(sample_tau_lower(n, n, 0.5), s.tau, 1e-3, "compex");
    EXPECT_TRUE(r.passed) << r.min_margin;
}

TEST(CompareFields, EllipticTimeDominatesSlowExchangeBarrier) {
    const int n = 128;
    const EllipticSolution s = solve_elliptic(discretize_Ld(PdeGrid(n), 0.5, 0.05));
    const ComparisonReport r = compare_fields(sample_barrier_V(n, 0.05), s.tau, calibrate_slack().eps(1.0 / n));
    EXPECT_TRUE(r.passed) << r.min_margin;
}

TEST(Slack, CalibrationIsFirstOrder) {
    const SlackPolicy pol = calibrate_slack();
    ASSERT_EQ(pol.calibration.size(), 3u);
    EXPECT_GT(pol.c, 1.0);
    EXPECT_LT(pol.c, 4.0);
    EXPECT_NEAR(pol.calibration[0].max_error / pol.calibration[2].max_error, 4.0, 0.2);
    EXPECT_DOUBLE_EQ(pol.eps(0.5), 0.5 * pol.c);
}

TEST(Convergence, ZeroReferenceAgainstZeroFieldsGivesZero) {
    // tau_N is not zero, so build the trivial case from the table itself.
    const ModelParams p(4, 4, 1.0);
    const HittingTimeTable t = solve_hitting_times(p);
    const auto rows = convergence_study({p}, t.values);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].sup_error, 0.0);
}

TEST(Convergence, ErrorDecreasesWithChainSize) {
    for (double d : {1.0, 0.5}) {
        const auto rows = convergence_study(d, 1.0, {8, 16, 32}, 128);
        ASSERT_EQ(rows.size(), 3u);
        EXPECT_LT(rows[1].sup_error, rows[0].sup_error) << d;
        EXPECT_LT(rows[2].sup_error, rows[1].sup_error) << d;
    }
}

TEST(Convergence, RejectsMisalignedGrids) {
    EXPECT_THROW(convergence_study(0.3, 1.0, {8}, 64), InvariantError);
    EXPECT_THROW(convergence_study(1.0, 1.0, {12}, 64), InvariantError);
}

TEST(DLimit, MechanicsAndReporting) {
    const SlackPolicy slack = calibrate_slack();
    const DLimitStudy s = d_limit_check(1.0, {0.5, 0.25}, 32, slack);
    ASSERT_EQ(s.rows.size(), 2u);
    for (const DLimitRow& r : s.rows) {
        EXPECT_DOUBLE_EQ(r.eps, slack.c / 32);
        EXPECT_TRUE(r.lower_ok) << r.d;
        EXPECT_GE(r.max_gap, r.min_gap);
        EXPECT_LE(r.residual, 1e-9);
    }
    const nlohmann::json j = io::to_json(s);
    EXPECT_TRUE(j.contains("rows"));
    EXPECT_THROW(d_limit_check(1.0, {0.25, 0.5}, 32, slack), InvariantError);
}

// The gap bound 2d(H(x2) + D) vanishes at the mixed corners while tau there
// stays of order 1/kappa, so the upper half of the sandwich cannot hold at
// (1,0) for any d. This pins that behaviour.
TEST(DLimit, BoundVanishesAtMixedCorners) {
    for (double d : {0.1, 0.02}) {
        EXPECT_EQ(small_d_gap_bound({1.0, 0.0}, d), 0.0);
        EXPECT_EQ(small_d_gap_bound({0.0, 1.0}, d), 0.0);
    }
    const int n = 64;
    const EllipticSolution s = solve_elliptic(discretize_Ld(PdeGrid(n), 0.05, 1.0));
    EXPECT_GT(s.tau(n, 0) - tau_lower({1.0, 0.0}, 0.05), 0.5);
}
