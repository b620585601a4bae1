#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "exchmat/combclt.hpp"

using namespace exchmat;

namespace {

struct MaxStub {
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return max(); }
};

std::vector<double> unit(std::size_t n, std::size_t i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    return e;
}

} // namespace

TEST(Variance, UnitCoefficient) {
    const std::vector<double> x{1, 1, -1, -1};
    EXPECT_NEAR(comb_variance_rank_one(unit(4, 0), x).sigma2, 1.0, 1e-15);
}

TEST(Variance, ConstantCoefficientIsExcluded) {
    const std::vector<double> x{1, 1, -1, -1};
    const std::vector<double> a(4, 0.5);
    const auto v = comb_variance_rank_one(a, x);
    EXPECT_EQ(v.sigma2, 0.0);
    EXPECT_TRUE(v.degenerate);
    EXPECT_THROW(CombCLTInstance(a, x), DegenerateError);
}

TEST(Variance, NearConstantIsFlagged) {
    const std::vector<double> x{1, 1, -1, -1};
    const std::vector<double> a{1.0, 1.0, 1.0, 1.0 + 1e-4};
    EXPECT_TRUE(comb_variance_rank_one(a, x).degenerate);
    EXPECT_TRUE(CombCLTInstance(a, x).near_degenerate());
}

TEST(Variance, InvalidScoresRejected) {
    EXPECT_THROW(comb_variance_rank_one(unit(2, 0), std::vector<double>{1.0, 1.0}), ValidationError);
    EXPECT_THROW(comb_variance_rank_one(unit(3, 0), std::vector<double>{1.0, -1.0}), DomainError);
}

TEST(Variance, TwoPointExampleMatchesEnumeration) {
    const CombCLTInstance inst({1.0, -1.0}, {1.0, -1.0});
    EXPECT_NEAR(inst.sigma2(), 4.0, 1e-15);
    const auto law = exact_distribution(inst);
    ASSERT_EQ(law.size(), 2u);
    EXPECT_DOUBLE_EQ(law[0].first, -2.0);
    EXPECT_DOUBLE_EQ(law[0].second, 0.5);
    EXPECT_DOUBLE_EQ(law[1].first, 2.0);
    EXPECT_DOUBLE_EQ(law[1].second, 0.5);
    EXPECT_NEAR(law_moments(law).variance, 4.0, 1e-15);
}

TEST(Variance, GeneralFormulaOnRankOneArray) {
    RngStream rng(1, 0);
    for (std::size_t n = 3; n <= 12; ++n) {
        const auto x = random_scores(n, rng, false);
        const auto a = gaussian_coefficients(n, rng);
        const auto g = comb_variance_general(rank_one_array(a, x));
        EXPECT_NEAR(g.sigma2, comb_variance_rank_one(a, x).sigma2, 1e-12 * std::max(1.0, g.sigma2));
    }
}

TEST(Variance, GeneralFormulaAnnihilatesAdditiveArrays) {
    const auto c0 = comb_variance_general(Matrix(5, 5, 3.0));
    EXPECT_NEAR(c0.sigma2, 0.0, 1e-15);
    EXPECT_NEAR(c0.A_max, 0.0, 1e-15);
    RngStream rng(2, 0);
    Matrix c(6, 6);
    std::vector<double> u(6), v(6);
    for (auto& t : u) t = standard_normal(rng);
    for (auto& t : v) t = standard_normal(rng);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) c(i, j) = u[i] + v[j];
    const auto g = comb_variance_general(c);
    EXPECT_NEAR(g.sigma2, 0.0, 1e-14);
    EXPECT_NEAR(g.A_max, 0.0, 1e-14);
}

TEST(Variance, GeneralFormulaMatchesEnumeration) {
    // W = sum c_{i pi(i)} over all 6! permutations
    RngStream rng(3, 0);
    Matrix c(6, 6);
    for (double& v : c.values()) v = standard_normal(rng);
    std::vector<std::size_t> p(6);
    std::iota(p.begin(), p.end(), std::size_t{0});
    long double s = 0, s2 = 0;
    int count = 0;
    do {
        long double w = 0;
        for (std::size_t i = 0; i < 6; ++i) w += c(i, p[i]);
        s += w;
        s2 += w * w;
        ++count;
    } while (std::next_permutation(p.begin(), p.end()));
    const double var = static_cast<double>(s2 / count - (s / count) * (s / count));
    EXPECT_NEAR(comb_variance_general(c).sigma2, var, 1e-12 * var);
}

TEST(BerryEsseen, UnitCoefficientArithmetic) {
    const CombCLTInstance inst(unit(4, 0), {1, 1, -1, -1});
    EXPECT_DOUBLE_EQ(inst.L(), 2.0);
    EXPECT_DOUBLE_EQ(inst.K(), 1.0);
    EXPECT_DOUBLE_EQ(be_bound(inst), 34.0);
}

TEST(BerryEsseen, BalancedCoefficients) {
    for (std::size_t n : {4u, 16u, 64u}) {
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = (i < n / 2 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(n));
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = i % 2 ? -1.0 : 1.0;
        const CombCLTInstance inst(a, x);
        EXPECT_NEAR(inst.L(), 1.0, 1e-15);
        const double nd = static_cast<double>(n);
        // sigma^2 = n/(n-1) |a|^2 here, so the bound is 34 K / sqrt(n) times sqrt((n-1)/n)
        EXPECT_NEAR(be_bound(inst), 34.0 / std::sqrt(nd) * std::sqrt((nd - 1.0) / nd), 1e-12);
    }
}

TEST(BerryEsseen, ScalesAsInverseRootN) {
    auto make = [](std::size_t n) {
        std::vector<double> a(n), x(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = (i % 4 < 2) ? 1.0 : -1.0;
            x[i] = (i < n / 2) ? 1.0 : -1.0;
        }
        return CombCLTInstance(a, x);
    };
    const auto small = make(100), big = make(400);
    EXPECT_DOUBLE_EQ(small.L(), big.L());
    const double ratio = be_bound(big) / be_bound(small);
    // bound = 34 sqrt(n-1) / n here
    EXPECT_NEAR(ratio, 0.25 * std::sqrt(399.0 / 99.0), 1e-12);
    EXPECT_NEAR(ratio, 0.5, 2e-3);
}

TEST(BerryEsseen, GeneralForm) {
    GeneralVariance v{4.0, 0.5};
    EXPECT_DOUBLE_EQ(be_bound_general(v), 16.3 * 0.5 / 2.0);
    EXPECT_THROW(be_bound_general({0.0, 1.0}), DegenerateError);
}

TEST(SampleW, StubIdentityGivesInnerProduct) {
    const CombCLTInstance inst({0.5, -2.0, 1.0, 3.0}, {1, -1, 1, -1});
    MaxStub stub;
    EXPECT_DOUBLE_EQ(sample_W(inst, stub), 0.5 + 2.0 + 1.0 - 3.0);
}

TEST(SampleW, Deterministic) {
    RngStream rng(4, 0);
    const CombCLTInstance inst(gaussian_coefficients(10, rng), random_scores(10, rng, true));
    RngStream a(9, 1), b(9, 1);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_W(inst, a), sample_W(inst, b));
}

TEST(ExactDistribution, MeanZeroAndVarianceFormula) {
    RngStream rng(5, 0);
    for (std::size_t n = 2; n <= 8; ++n) {
        const CombCLTInstance inst(gaussian_coefficients(n, rng), random_scores(n, rng, false));
        const auto law = exact_distribution(inst);
        double total = 0.0;
        for (const auto& [v, p] : law) total += p;
        EXPECT_NEAR(total, 1.0, 1e-12);
        const auto m = law_moments(law);
        EXPECT_NEAR(m.mean, 0.0, 1e-12);
        EXPECT_NEAR(m.variance, inst.sigma2(), 1e-10 * inst.sigma2());
    }
}

TEST(ExactDistribution, UnitCoefficientIsUniformOnScores) {
    const double r = std::sqrt(1.5);
    const CombCLTInstance inst(unit(3, 0), {r, 0.0, -r});
    const auto law = exact_distribution(inst);
    ASSERT_EQ(law.size(), 3u);
    for (const auto& [v, p] : law) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(law[0].first, -r);
    EXPECT_DOUBLE_EQ(law[1].first, 0.0);
    EXPECT_DOUBLE_EQ(law[2].first, r);
}

TEST(ExactDistribution, RefusesLargeN) {
    RngStream rng(6, 0);
    const CombCLTInstance inst(gaussian_coefficients(9, rng), random_scores(9, rng, false));
    EXPECT_THROW(exact_distribution(inst), EnumerationLimit);
}

TEST(ExactDistribution, ScaleCovariance) {
    RngStream rng(7, 0);
    const CombCLTInstance inst(gaussian_coefficients(7, rng), random_scores(7, rng, false));
    const auto law = exact_distribution(inst);
    const double ks = ks_to_gaussian(law, inst.sigma());
    for (double lambda : {0.25, 3.0, -2.0}) {
        const auto scaled_inst = inst.scaled_by(lambda);
        EXPECT_NEAR(scaled_inst.sigma(), std::abs(lambda) * inst.sigma(), 1e-12);
        const auto law2 = exact_distribution(scaled_inst);
        EXPECT_NEAR(ks_to_gaussian(law2, scaled_inst.sigma()), ks, 1e-12);
        MaxStub s1, s2;
        EXPECT_NEAR(sample_W(scaled_inst, s1), lambda * sample_W(inst, s2), 1e-12);
    }
}

TEST(BerryEsseen, ExactLawWithinBound) {
    RngStream rng(8, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 4 + static_cast<std::size_t>(rep % 5);
        const CombCLTInstance inst(gaussian_coefficients(n, rng), random_scores(n, rng, rep % 2 == 0));
        EXPECT_LE(ks_to_gaussian(exact_distribution(inst), inst.sigma()), be_bound(inst));
    }
}
