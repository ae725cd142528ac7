#include <gtest/gtest.h>

#include <cmath>

#include "twopatch/exact.hpp"
#include "twopatch/montecarlo.hpp"

using namespace twopatch;

TEST(Trajectory, AbsorbingStartTakesNoSteps) {
    const ModelParams p(5, 5, 1.0);
    RandomStream rng = derive_stream(0, 0);
    const Trajectory t = simulate_trajectory(p, {5, 5}, rng, 10);
    EXPECT_EQ(t.steps, 0);
    EXPECT_FALSE(t.censored);
    EXPECT_EQ(t.terminal, (GridState{5, 5}));
}

TEST(Trajectory, CensoringIsReported) {
    // kappa*dt = 2.5e-4: a migrant reaches patch 2 about once per 1000 steps.
    const ModelParams p(4, 4, 1e-3);
    McConfig cfg;
    cfg.replicates = 2000;
    cfg.seed = 3;
    cfg.max_steps = 20;
    cfg.start = {4, 0};
    const McResult r = estimate_extinction_time(p, cfg);
    EXPECT_GT(r.censored_fraction, 0.9);
    EXPECT_TRUE(r.mean_is_lower_bound);
}

TEST(Estimate, SingleReplicateFromAbsorbingStart) {
    McConfig cfg;
    cfg.replicates = 1;
    cfg.start = {0, 0};
    const McResult r = estimate_extinction_time(ModelParams(3, 2, 1.0), cfg);
    EXPECT_EQ(r.mean_time, 0.0);
    EXPECT_EQ(r.stderr_time, 0.0);
    EXPECT_EQ(r.censored_fraction, 0.0);
}

TEST(Estimate, TinyChainMatchesHandSolvedMean) {
    McConfig cfg;
    cfg.replicates = 100'000;
    cfg.seed = 2024;
    cfg.start = {0, 1};
    const McResult r = estimate_extinction_time(ModelParams(1, 1, 0.5), cfg);
    EXPECT_EQ(r.censored_fraction, 0.0);
    EXPECT_NEAR(r.mean_time, 2.0, 3.0 * r.stderr_time);
}

TEST(Estimate, MatchesExactSolverAtCenter) {
    const ModelParams p(8, 8, 1.0);
    McConfig cfg;
    cfg.replicates = 40'000;
    cfg.seed = 77;
    cfg.start = {4, 4};
    const McResult r = estimate_extinction_time(p, cfg);
    const double exact = solve_hitting_times(p).values(4, 4);
    EXPECT_EQ(r.censored_fraction, 0.0);
    EXPECT_NEAR(r.mean_time, exact, 3.0 * r.stderr_time);
}

TEST(Estimate, DeterministicAndIndependentOfThreadCount) {
    const ModelParams p(10, 5, 1.0);
    McConfig cfg;
    cfg.replicates = 3000;
    cfg.seed = 123;
    cfg.start = {3, 4};
    cfg.keep_raw = true;
    cfg.threads = 1;
    const McResult serial = estimate_extinction_time(p, cfg);
    const McResult again = estimate_extinction_time(p, cfg);
    cfg.threads = 4;
    const McResult parallel = estimate_extinction_time(p, cfg);
    EXPECT_EQ(serial, again);
    EXPECT_EQ(serial, parallel);
    ASSERT_EQ(serial.raw.size(), 3000u);
    EXPECT_EQ(serial.raw[17].index, 17);
    cfg.seed = 124;
    EXPECT_NE(estimate_extinction_time(p, cfg).mean_time, serial.mean_time);
}

TEST(Estimate, SpeciesAndPatchSwapSymmetry) {
    const ModelParams p(8, 8, 1.0);
    McConfig cfg;
    cfg.replicates = 20'000;
    auto estimate = [&](GridState s, std::uint64_t seed) {
        cfg.start = s;
        cfg.seed = seed;
        return estimate_extinction_time(p, cfg);
    };
    const McResult a = estimate({2, 5}, 1), mirror = estimate({6, 3}, 2), swapped = estimate({5, 2}, 3);
    EXPECT_NEAR(a.mean_time, mirror.mean_time, 4.0 * std::hypot(a.stderr_time, mirror.stderr_time));
    EXPECT_NEAR(a.mean_time, swapped.mean_time, 4.0 * std::hypot(a.stderr_time, swapped.stderr_time));
}

TEST(Estimate, RejectsBadConfig) {
    const ModelParams p(4, 2, 1.0);
    McConfig cfg;
    cfg.replicates = 0;
    EXPECT_THROW(estimate_extinction_time(p, cfg), InvariantError);
    cfg.replicates = 10;
    cfg.start = {5, 0};
    EXPECT_THROW(estimate_extinction_time(p, cfg), InvariantError);
}

TEST(MomentCheck, LagZeroVanishes) {
    const auto table = moment_check(ModelParams(16, 16, 1.0), {8, 8}, 4, 500, 9);
    ASSERT_EQ(table.size(), 5u);
    EXPECT_EQ(table[0].p2, 0.0);
    EXPECT_EQ(table[0].p4, 0.0);
    EXPECT_GT(table[1].p2, 0.0);
}

// One-step second moment scaled by N stays O(1) across N; compared against the
// exact bound 1/4 + 1/(4d) + kappa^2 (1+d^2)/N plus Monte Carlo slack.
TEST(MomentCheck, SecondMomentScalesAsOneOverN) {
    for (int n : {8, 16, 32}) {
        const auto table = moment_check(ModelParams(n, n, 1.0), {n / 2, n / 2}, 1, 20'000, 41);
        EXPECT_LE(table[1].p2_scaled, (0.5 + 2.0 / n) * 1.1) << "N=" << n;
        EXPECT_GE(table[1].p2_scaled, 0.3) << "N=" << n;
    }
}

TEST(MomentCheck, DeterministicAcrossThreadCounts) {
    const ModelParams p(16, 8, 1.0);
    const auto a = moment_check(p, {8, 4}, 8, 2000, 5, 1);
    const auto b = moment_check(p, {8, 4}, 8, 2000, 5, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].p2, b[i].p2);
        EXPECT_EQ(a[i].p4, b[i].p4);
    }
}
