#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "twopatch/closed_form.hpp"
#include "twopatch/exchange.hpp"
#include "twopatch/params.hpp"
#include "twopatch/random.hpp"

using namespace twopatch;

TEST(ModelParams, DerivesDistortionAndTimeStep) {
    const ModelParams p(4, 2, 1.0);
    EXPECT_DOUBLE_EQ(p.d(), 0.5);
    EXPECT_DOUBLE_EQ(p.dt(), 0.25);
    EXPECT_EQ(p.n_states(), 15u);
}

TEST(ModelParams, RejectsInvalidCapacitiesAndRates) {
    EXPECT_THROW(ModelParams(2, 4, 1.0), InvariantError);   // d > 1
    EXPECT_THROW(ModelParams(0, 0, 1.0), InvariantError);
    EXPECT_THROW(ModelParams(4, 2, -0.1), InvariantError);
    EXPECT_THROW(ModelParams(4, 2, 4.5), InvariantError);   // kappa*dt > 1
    EXPECT_NO_THROW(ModelParams(4, 2, 4.0));                // kappa*dt == 1
    EXPECT_THROW(ModelParams(4, 2, std::nan("")), InvariantError);
}

TEST(GridState, AbsorbingOnlyAtTheTwoMonomorphicCorners) {
    const ModelParams p(3, 2, 1.0);
    EXPECT_TRUE((GridState{0, 0}.absorbing(p)));
    EXPECT_TRUE((GridState{3, 2}.absorbing(p)));
    EXPECT_FALSE((GridState{3, 0}.absorbing(p)));
    EXPECT_FALSE((GridState{0, 2}.absorbing(p)));
    EXPECT_EQ((GridState{2, 1}.index(p)), 7u);
    EXPECT_EQ(GridState::from_index(7, p), (GridState{2, 1}));
    EXPECT_EQ((GridState{1, 0}.mirrored(p)), (GridState{2, 2}));
}

TEST(ExchangeMatrix, MatchesDisplayedEntries) {
    const ExchangeMatrix a = build_exchange_matrix(ModelParams(4, 2, 1.0));
    EXPECT_DOUBLE_EQ(a.a11, 0.875);
    EXPECT_DOUBLE_EQ(a.a12, 0.125);
    EXPECT_DOUBLE_EQ(a.a21, 0.25);
    EXPECT_DOUBLE_EQ(a.a22, 0.75);
}

TEST(ExchangeMatrix, ZeroRateIsIdentity) {
    const ExchangeMatrix a = build_exchange_matrix(ModelParams(7, 3, 0.0));
    EXPECT_EQ(a.a11, 1.0);
    EXPECT_EQ(a.a12, 0.0);
    EXPECT_EQ(a.a21, 0.0);
    EXPECT_EQ(a.a22, 1.0);
}

TEST(ExchangeMatrix, ApplyFixesCornersAndMatchesProduct) {
    const ExchangeMatrix a = build_exchange_matrix(ModelParams(4, 2, 1.0));
    EXPECT_EQ(apply_exchange({1.0, 1.0}, a), (Density{1.0, 1.0}));
    EXPECT_EQ(apply_exchange({0.0, 0.0}, a), (Density{0.0, 0.0}));
    const Density y = apply_exchange({1.0, 0.0}, a);
    EXPECT_DOUBLE_EQ(y.x1, 0.875);
    EXPECT_DOUBLE_EQ(y.x2, 0.25);
    EXPECT_THROW(apply_exchange({1.2, 0.0}, a), InvariantError);
}

// Random valid parameters and densities: rows sum to one, the square is
// mapped into itself and x1 + d x2 is conserved.
TEST(ExchangeMatrix, PropertyStochasticStableAndConservative) {
    std::mt19937_64 gen(20240917);
    std::uniform_int_distribution<int> cap(1, 200);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 5000; ++trial) {
        int n1 = cap(gen), n2 = cap(gen);
        if (n2 > n1) std::swap(n1, n2);
        const double kappa = unit(gen) * n1;  // kappa*dt in [0,1)
        const ModelParams p(n1, n2, kappa);
        const ExchangeMatrix a = build_exchange_matrix(p);
        ASSERT_NEAR(a.a11 + a.a12, 1.0, 1e-15);
        ASSERT_NEAR(a.a21 + a.a22, 1.0, 1e-15);
        for (double e : {a.a11, a.a12, a.a21, a.a22}) {
            ASSERT_GE(e, 0.0);
            ASSERT_LE(e, 1.0);
        }
        const Density x{unit(gen), unit(gen)};
        const Density y = apply_exchange(x, a);
        ASSERT_GE(y.x1, 0.0);
        ASSERT_LE(y.x1, 1.0);
        ASSERT_GE(y.x2, 0.0);
        ASSERT_LE(y.x2, 1.0);
        ASSERT_NEAR(y.x1 + p.d() * y.x2, x.x1 + p.d() * x.x2, 1e-15);
    }
}

TEST(WfSample, DegenerateProbabilities) {
    RandomStream rng = derive_stream(1, 0);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(wf_sample(0.0, 16, rng), 0);
        EXPECT_EQ(wf_sample(1.0, 16, rng), 16);
        EXPECT_EQ(wf_sample(1.0, 500, rng), 500);
    }
    EXPECT_THROW(wf_sample(-0.01, 4, rng), InvariantError);
    EXPECT_THROW(wf_sample(1.01, 4, rng), InvariantError);
}

TEST(WfSample, MeanOfMillionDrawsWithinFourSigma) {
    RandomStream rng = derive_stream(99, 3);
    const int n = 16;
    const double p = 0.3;
    double sum = 0.0;
    const int draws = 1'000'000;
    for (int i = 0; i < draws; ++i) sum += wf_sample(p, n, rng);
    const double sigma = std::sqrt(n * p * (1.0 - p)) / 1000.0;
    EXPECT_NEAR(sum / draws, 4.8, 4.0 * sigma);
}

namespace {
// Binomial pmf by the product formula, independent of the library's log-space path.
double direct_pmf(int n, int j, double p) {
    double c = 1.0;
    for (int i = 1; i <= j; ++i) c = c * (n - j + i) / i;
    return c * std::pow(p, j) * std::pow(1.0 - p, n - j);
}

// Pearson statistic of `draws` samples against the exact pmf (bins with
// expected count < 5 pooled into a tail bin).
std::pair<double, int> chi_square(int n, double p, int draws, std::uint64_t seed) {
    RandomStream rng = derive_stream(seed, 0);
    std::vector<int> counts(n + 1, 0);
    for (int i = 0; i < draws; ++i) ++counts[wf_sample(p, n, rng)];
    double stat = 0.0, pooled_e = 0.0, pooled_o = 0.0;
    int bins = 0;
    for (int j = 0; j <= n; ++j) {
        const double e = draws * direct_pmf(n, j, p);
        if (e < 5.0) {
            pooled_e += e;
            pooled_o += counts[j];
            continue;
        }
        stat += (counts[j] - e) * (counts[j] - e) / e;
        ++bins;
    }
    if (pooled_e > 0.0) {
        stat += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
        ++bins;
    }
    return {stat, bins - 1};
}
}  // namespace

// Goodness of fit on both sampler paths (inversion and rejection). The
// threshold is dof + 5 sqrt(2 dof), far in the chi-square tail.
TEST(WfSample, DistributionMatchesBinomialPmf) {
    for (auto [n, p] : {std::pair{10, 0.37}, {64, 0.81}, {1, 0.5}, {200, 0.3}, {1000, 0.02}}) {
        const auto [stat, dof] = chi_square(n, p, 200'000, 7 + n);
        EXPECT_LT(stat, dof + 5.0 * std::sqrt(2.0 * dof)) << "n=" << n << " p=" << p;
    }
}

TEST(DeriveStream, DependsOnlyOnSeedAndIndex) {
    RandomStream a = derive_stream(42, 5), b = derive_stream(42, 5), c = derive_stream(42, 6),
                 e = derive_stream(43, 5);
    const auto va = a(), vb = b(), vc = c(), ve = e();
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, ve);
}

TEST(Entropy, BoundaryAndMidpoint) {
    EXPECT_EQ(entropy_H(0.0), 0.0);
    EXPECT_EQ(entropy_H(1.0), 0.0);
    EXPECT_NEAR(entropy_H(0.5), 2.0 * std::numbers::ln2, 1e-15);
    EXPECT_NEAR(entropy_H(0.5), 1.3862944, 1e-7);
    EXPECT_THROW(entropy_H(1.5), InvariantError);
}

TEST(Entropy, SolvesSinglePatchOdeByCentralDifferences) {
    const double x = 0.3;
    double prev = INFINITY;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        const double h2 = (entropy_H(x + h) - 2.0 * entropy_H(x) + entropy_H(x - h)) / (h * h);
        const double err = std::abs(-(x * (1.0 - x) / 2.0) * h2 - 1.0);
        EXPECT_LT(err, 10.0 * h * h);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(TauLower, ValuesAtCornersDiagonalAndCenter) {
    EXPECT_EQ(tau_lower({0.0, 0.0}, 0.5), 0.0);
    EXPECT_EQ(tau_lower({1.0, 1.0}, 0.5), 0.0);
    EXPECT_NEAR(tau_lower({0.5, 0.5}, 1.0), 4.0 * std::numbers::ln2, 1e-15);
    EXPECT_NEAR(tau_lower({0.5, 0.5}, 1.0), 2.7725887, 1e-7);
    for (double d : {0.1, 0.5, 1.0})
        for (double a : {0.05, 0.3, 0.8}) EXPECT_NEAR(tau_lower({a, a}, d), (1.0 + d) * entropy_H(a), 1e-14);
    EXPECT_THROW(tau_lower({0.2, 0.2}, 1.5), InvariantError);
}

TEST(AnalyticBounds, BarrierValues) {
    const ModelParams p(1, 1, 1.0);
    EXPECT_EQ(analytic_bounds({0.0, 0.0}, p).V, 0.0);
    EXPECT_EQ(analytic_bounds({1.0, 1.0}, p).V, 0.0);
    EXPECT_NEAR(analytic_bounds({1.0, 0.0}, p).V, 1.0 / 12.0, 1e-16);
    EXPECT_THROW(barrier_V({0.5, 0.5}, 0.0), InvariantError);
}

TEST(AnalyticBounds, SubsolutionIdentityHoldsOnInteriorGrid) {
    for (double d : {0.01, 0.2, 0.5, 0.75, 1.0}) {
        double worst = 0.0;
        for (int i = 1; i <= 50; ++i)
            for (int k = 1; k <= 50; ++k) {
                const Density x{i / 51.0, k / 51.0};
                const auto r = subsolution_identity_residual(x, d);
                ASSERT_TRUE(r.has_value());
                worst = std::max(worst, std::abs(*r));
            }
        EXPECT_LE(worst, 1e-12) << "d=" << d;
    }
}

TEST(AnalyticBounds, IdentityUndefinedWhereAveragedDensityIsDegenerate) {
    EXPECT_FALSE(subsolution_identity_residual({0.0, 0.0}, 0.5).has_value());
    EXPECT_FALSE(subsolution_identity_residual({1.0, 1.0}, 0.5).has_value());
    EXPECT_TRUE(subsolution_identity_residual({1.0, 0.0}, 0.5).has_value());
}

TEST(AnalyticBounds, SmallDistortionWidth) {
    // D(0,0) = D(1,1) = 1, so the width is 2d at both absorbing corners.
    EXPECT_NEAR(small_d_gap_bound({0.0, 0.0}, 0.05), 0.1, 1e-15);
    EXPECT_NEAR(small_d_gap_bound({1.0, 1.0}, 0.05), 0.1, 1e-15);
    // Both H(x2) and D vanish at the mixed corners.
    EXPECT_EQ(small_d_gap_bound({1.0, 0.0}, 0.05), 0.0);
    EXPECT_EQ(small_d_gap_bound({0.0, 1.0}, 0.05), 0.0);
    const double d = 0.1;
    const Density x{0.3, 0.6};
    const double expect = 2 * d * (entropy_H(0.6) + 0.3 * std::pow(0.6, d) + 0.7 * std::pow(0.4, d));
    EXPECT_NEAR(small_d_gap_bound(x, d), expect, 1e-15);
}
