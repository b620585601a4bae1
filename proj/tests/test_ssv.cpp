#include <gtest/gtest.h>

#include <cmath>

#include "exchmat/ssv.hpp"
#include "test_util.hpp"

using namespace exchmat;

TEST(Wilson, KnownValues) {
    auto [lo, hi] = wilson_interval(0, 100);
    EXPECT_EQ(lo, 0.0);
    EXPECT_NEAR(hi, 0.036994, 1e-6);
    std::tie(lo, hi) = wilson_interval(50, 100);
    EXPECT_NEAR(lo, 0.403832, 1e-6);
    EXPECT_NEAR(hi, 0.596168, 1e-6);
    std::tie(lo, hi) = wilson_interval(100, 100);
    EXPECT_NEAR(lo, 0.963006, 1e-6);
    EXPECT_EQ(hi, 1.0);
}

TEST(SsvExperiment, Validation) {
    SsvExperiment e{10, RademacherKind{}, 0.0, {0.1, 0.2}, 5, 1};
    EXPECT_NO_THROW(e.validate());
    e.epsilons = {0.2, 0.1};
    EXPECT_THROW(e.validate(), ValidationError);
    e.epsilons = {0.0, 0.1};
    EXPECT_THROW(e.validate(), ValidationError);
    e.epsilons = {};
    EXPECT_THROW(e.validate(), ValidationError);
    e.epsilons = {0.1};
    e.trials = 0;
    EXPECT_THROW(e.validate(), ValidationError);
}

TEST(SsvTailCurve, MonotoneInEpsilon) {
    SsvExperiment e{40, RademacherKind{}, {0.3, 0.2}, {0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2}, 60, 7};
    const auto c = ssv_tail_curve(e);
    ASSERT_EQ(c.rows.size(), e.epsilons.size());
    EXPECT_EQ(c.failures, 0u);
    EXPECT_EQ(c.smallest.size(), 60u);
    for (std::size_t i = 1; i < c.rows.size(); ++i) {
        EXPECT_GE(c.rows[i].p_hat, c.rows[i - 1].p_hat);
        EXPECT_GT(c.rows[i].threshold, c.rows[i - 1].threshold);
    }
    for (const auto& r : c.rows) {
        EXPECT_LE(r.ci_lo, r.p_hat);
        EXPECT_GE(r.ci_hi, r.p_hat);
        EXPECT_NEAR(r.threshold, r.epsilon / (std::sqrt(40.0) * (1.0 + std::abs(e.z))), 1e-15);
    }
    EXPECT_GT(c.min_sqrt_n_sn, 0.0);
}

TEST(SsvTailCurve, DoublingEpsilonNeverLowersProbability) {
    SsvExperiment e{30, SparseKind{0.5, 1.0}, 0.0, {}, 40, 3};
    for (double eps = 0.005; eps < 10.0; eps *= 2.0) e.epsilons.push_back(eps);
    const auto c = ssv_tail_curve(e);
    for (std::size_t i = 1; i < c.rows.size(); ++i) EXPECT_GE(c.rows[i].p_hat, c.rows[i - 1].p_hat);
}

TEST(SsvTailCurve, DeterministicAcrossThreadCounts) {
    SsvExperiment e{25, GaussianKind{}, {0.0, 0.5}, {0.1, 1.0}, 16, 99};
    const auto a = ssv_tail_curve(e, 1);
    const auto b = ssv_tail_curve(e, 4);
    EXPECT_EQ(a.smallest, b.smallest);
    EXPECT_EQ(a.rows[1].p_hat, b.rows[1].p_hat);
}

TEST(SsvTailCurve, SmallEpsilonIsRareAtTwoHundred) {
    SsvExperiment e{200, RademacherKind{}, 1.0, {0.01}, 100, 2024};
    const auto c = ssv_tail_curve(e);
    EXPECT_EQ(c.failures, 0u);
    EXPECT_LE(c.rows[0].p_hat, 0.1);
    EXPECT_GT(c.min_sqrt_n_sn, 1e-6);
}

TEST(DistanceRatio, KZeroIsRowNorm) {
    // rows of a shuffled +-1 matrix have |Z_1|^2 = n exactly at z = 0
    const auto d = distance_ratio_stats(rademacher_seed(16), 0, 0.0, 10, 1);
    EXPECT_NEAR(d.min, 1.0, 1e-14);
    EXPECT_NEAR(d.mean, 1.0, 1e-14);
    EXPECT_EQ(d.degenerate, 0u);
}

TEST(DistanceRatio, ZeroRowsAreFlagged) {
    // two nonzero cells out of 16: row 2 is usually zero
    const auto d = distance_ratio_stats(sparse_seed(4, 0.01), 1, 0.0, 50, 2);
    EXPECT_GT(d.degenerate, 0u);
    EXPECT_EQ(d.min, 0.0);
}

TEST(DistanceRatio, RejectsLargeK) {
    EXPECT_THROW(distance_ratio_stats(rademacher_seed(6), 5, 0.0, 1, 1), DomainError);
}

TEST(DistanceRatio, HalfSpanAtOneHundred) {
    const auto d = distance_ratio_stats(rademacher_seed(100), 50, 0.0, 50, 17);
    EXPECT_GT(d.min, 0.2);
    EXPECT_LE(d.min, d.median);
    EXPECT_EQ(d.degenerate, 0u);
}

TEST(Intermediate, IdentityHolds) {
    const auto r = intermediate_sv_check(Matrix::identity(50), 0.0, 0.6, 1.0);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.worst_ratio, 50.0 / 49.0, 1e-12);
}

TEST(Intermediate, WorstRatioIsScaleCovariant) {
    RngStream rng(3, 0);
    const Matrix a = exchmat::testing::random_matrix(30, 30, rng);
    const cplx z{0.2, 0.1};
    const auto r1 = intermediate_sv_check(a, z, 0.5, 0.05);
    const auto r2 = intermediate_sv_check(scaled(a, 2.0), 2.0 * z, 0.5, 0.05);
    EXPECT_NEAR(r2.worst_ratio, 2.0 * r1.worst_ratio, 1e-10 * r1.worst_ratio);
}

TEST(Intermediate, RejectsBadProbes) {
    const auto sv = singular_values_shifted(Matrix::identity(4), 0.0);
    EXPECT_THROW(intermediate_sv_check(sv, 0.6, 0.0), DomainError);
    EXPECT_THROW(intermediate_sv_check(sv, 1.0, 0.1), DomainError);
}

TEST(Intermediate, RademacherTwoHundred) {
    const auto seed = rademacher_seed(200);
    int holds = 0;
    for (std::uint64_t t = 0; t < 20; ++t) {
        RngStream rng(555, t);
        const auto x = shuffle(seed, rng);
        holds += intermediate_sv_check(scaled(x.entries, 1.0 / std::sqrt(200.0)), 0.5, 0.6, 0.05).holds;
    }
    EXPECT_GE(holds, 19);
}

TEST(NegSecondMoment, Identity) {
    const auto r = neg_second_moment_check(to_complex(Matrix::identity(6)));
    EXPECT_NEAR(r.lhs, 6.0, 1e-12);
    EXPECT_NEAR(r.rhs, 6.0, 1e-12);
    EXPECT_LT(r.discrepancy, 1e-12);
}

TEST(NegSecondMoment, Diagonal) {
    Matrix d(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    const auto r = neg_second_moment_check(to_complex(d));
    EXPECT_NEAR(r.lhs, 1.25, 1e-14);
    EXPECT_NEAR(r.rhs, 1.25, 1e-14);
}

TEST(NegSecondMoment, RandomComplexFiveByEight) {
    RngStream rng(6, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const auto r = neg_second_moment_check(exchmat::testing::random_cmatrix(5, 8, rng));
        EXPECT_LT(r.discrepancy, 1e-8);
    }
}

TEST(NegSecondMoment, RankDeficientRejected) {
    CMatrix b(2, 3);
    b(0, 0) = b(1, 0) = 1.0;
    EXPECT_THROW(neg_second_moment_check(b), DegenerateError);
}
