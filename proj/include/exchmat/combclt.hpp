#ifndef EXCHMAT_COMBCLT_HPP
#define EXCHMAT_COMBCLT_HPP

// Combinatorial central limit theorem lab.
//
// For scores x (sum 0, square sum n, |x_i| <= K) and coefficients a, the
// permutation statistic W = sum_i a_i x_{pi(i)} has
//   Var W = (n sum a_i^2 - (sum a_i)^2) / (n - 1)
// and its Kolmogorov distance to N(0, Var W) is at most 34 L K |a| / (sigma sqrt n)
// with L = sqrt(n) max|a_i| / |a|. For a general array c, W = sum_i c_{i pi(i)}
// has Hoeffding's variance (doubly centered square sum over n - 1) and the
// bound 16.3 A / sigma, A the largest doubly centered entry.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "exchmat/error.hpp"
#include "exchmat/matrix.hpp"
#include "exchmat/rng.hpp"
#include "exchmat/spectral.hpp"

namespace exchmat {

inline constexpr double kBerryEsseenRankOne = 34.0;
inline constexpr double kBerryEsseenGeneral = 16.3;
inline constexpr std::size_t kMaxEnumerationN = 8;

struct VarianceResult {
    double sigma2 = 0.0;
    bool degenerate = false;  ///< sigma2 < 1e-6 |a|^2, including the excluded constant case
};

namespace detail {
inline void check_scores(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) throw ValidationError("scores: need n >= 2");
    double s = 0.0, s2 = 0.0;
    for (double v : x) {
        s += v;
        s2 += v * v;
    }
    if (std::abs(s) > 1e-9 * n || std::abs(s2 - n) > 1e-9 * n)
        throw ValidationError("scores: need sum x = 0 and sum x^2 = n; residuals " + std::to_string(std::abs(s)) +
                              ", " + std::to_string(std::abs(s2 - n)));
}
} // namespace detail

inline VarianceResult comb_variance_rank_one(std::span<const double> a, std::span<const double> x) {
    if (a.size() != x.size()) throw DomainError("comb_variance_rank_one: a and x differ in length");
    detail::check_scores(x);
    const double n = static_cast<double>(a.size());
    double sa = 0.0, sa2 = 0.0;
    for (double v : a) {
        sa += v;
        sa2 += v * v;
    }
    const double sigma2 = std::max(0.0, (n * sa2 - sa * sa) / (n - 1.0));
    return {sigma2, sigma2 < 1e-6 * sa2 || sa2 == 0.0};
}

struct GeneralVariance {
    double sigma2 = 0.0;
    double A_max = 0.0;
};

/// Doubly centered array d_ij = c_ij - row_i - col_j + grand.
inline Matrix doubly_centered(const Matrix& c) {
    if (!c.square() || c.rows() == 0) throw DomainError("comb_variance_general: need a nonempty square array");
    const std::size_t n = c.rows();
    const double nd = static_cast<double>(n);
    std::vector<double> row(n, 0.0), col(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            row[i] += c(i, j);
            col[j] += c(i, j);
            grand += c(i, j);
        }
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d(i, j) = c(i, j) - row[i] / nd - col[j] / nd + grand / (nd * nd);
    return d;
}

inline GeneralVariance comb_variance_general(const Matrix& c) {
    if (c.rows() < 2) throw DomainError("comb_variance_general: need n >= 2");
    const Matrix d = doubly_centered(c);
    double ss = 0.0, amax = 0.0;
    for (double v : d.values()) {
        ss += v * v;
        amax = std::max(amax, std::abs(v));
    }
    return {ss / static_cast<double>(c.rows() - 1), amax};
}

/// The rank-one array c_ij = a_i x_j.
inline Matrix rank_one_array(std::span<const double> a, std::span<const double> x) {
    Matrix c(a.size(), x.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) c(i, j) = a[i] * x[j];
    return c;
}

class CombCLTInstance {
public:
    CombCLTInstance(std::vector<double> a, std::vector<double> x) : a_(std::move(a)), x_(std::move(x)) {
        const auto v = comb_variance_rank_one(a_, x_);
        if (v.sigma2 == 0.0)
            throw DegenerateError("CombCLTInstance: a is constant of one sign (zero variance)");
        sigma2_ = v.sigma2;
        near_degenerate_ = v.degenerate;
        for (double xi : x_) k_ = std::max(k_, std::abs(xi));
        double amax = 0.0, a2 = 0.0;
        for (double ai : a_) {
            amax = std::max(amax, std::abs(ai));
            a2 += ai * ai;
        }
        a_norm_ = std::sqrt(a2);
        l_ = std::sqrt(static_cast<double>(n())) * amax / a_norm_;
    }

    std::size_t n() const noexcept { return a_.size(); }
    std::span<const double> a() const noexcept { return a_; }
    std::span<const double> x() const noexcept { return x_; }
    double K() const noexcept { return k_; }
    double L() const noexcept { return l_; }
    double a_norm() const noexcept { return a_norm_; }
    double sigma2() const noexcept { return sigma2_; }
    double sigma() const { return std::sqrt(sigma2_); }
    bool near_degenerate() const noexcept { return near_degenerate_; }

    CombCLTInstance scaled_by(double lambda) const {
        std::vector<double> a = a_;
        for (double& v : a) v *= lambda;
        return {std::move(a), x_};
    }

private:
    std::vector<double> a_, x_;
    double k_ = 0.0, l_ = 0.0, a_norm_ = 0.0, sigma2_ = 0.0;
    bool near_degenerate_ = false;
};

/// 34 L K |a| / (sigma sqrt n).
inline double be_bound(const CombCLTInstance& inst) {
    return kBerryEsseenRankOne * inst.L() * inst.K() * inst.a_norm() /
           (inst.sigma() * std::sqrt(static_cast<double>(inst.n())));
}

/// 16.3 A / sigma for a general array.
inline double be_bound_general(const GeneralVariance& v) {
    if (!(v.sigma2 > 0.0)) throw DegenerateError("be_bound_general: zero variance");
    return kBerryEsseenGeneral * v.A_max / std::sqrt(v.sigma2);
}

inline double w_for(const CombCLTInstance& inst, const Permutation& pi) {
    double w = 0.0;
    const auto a = inst.a();
    const auto x = inst.x();
    for (std::size_t i = 0; i < a.size(); ++i) w += a[i] * x[pi[i]];
    return w;
}

template <std::uniform_random_bit_generator G>
double sample_W(const CombCLTInstance& inst, G& gen) {
    return w_for(inst, sample_permutation(gen, inst.n()));
}

/// Exact law of W over all n! permutations (n <= 8), atoms sorted by value.
inline std::vector<std::pair<double, double>> exact_distribution(const CombCLTInstance& inst) {
    const std::size_t n = inst.n();
    if (n > kMaxEnumerationN) throw EnumerationLimit("exact_distribution: n > 8");
    Permutation pi = Permutation::identity(n);
    std::vector<double> values;
    do {
        values.push_back(w_for(inst, pi));
    } while (std::next_permutation(pi.map.begin(), pi.map.end()));
    std::sort(values.begin(), values.end());
    const double p = 1.0 / static_cast<double>(values.size());
    std::vector<std::pair<double, double>> law;
    for (double v : values) {
        if (!law.empty() && law.back().first == v) law.back().second += p;
        else law.emplace_back(v, p);
    }
    return law;
}

struct LawMoments {
    double mean = 0.0;
    double variance = 0.0;
};

inline LawMoments law_moments(std::span<const std::pair<double, double>> law) {
    long double m = 0, m2 = 0;
    for (const auto& [v, p] : law) {
        m += static_cast<long double>(p) * v;
        m2 += static_cast<long double>(p) * v * v;
    }
    return {static_cast<double>(m), static_cast<double>(m2 - m * m)};
}

inline double ks_to_gaussian(std::span<const double> draws, double sigma) {
    return ks_statistic(draws, {Law::gaussian, sigma}).statistic;
}

inline double ks_to_gaussian(std::span<const std::pair<double, double>> law, double sigma) {
    return ks_statistic_discrete({law.begin(), law.end()}, {Law::gaussian, sigma});
}

// ---------------------------------------------------------------------------
// Instance generators

/// Balanced +-1 scores for even n; centered, rescaled Gaussian scores otherwise.
template <std::uniform_random_bit_generator G>
std::vector<double> random_scores(std::size_t n, G& gen, bool balanced_signs) {
    std::vector<double> x(n);
    if (balanced_signs && n % 2 == 0) {
        for (std::size_t i = 0; i < n; ++i) x[i] = i < n / 2 ? 1.0 : -1.0;
        return x;
    }
    for (double& v : x) v = standard_normal(gen);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double& v : x) {
        v -= mean;
        ss += v * v;
    }
    const double f = std::sqrt(static_cast<double>(n) / ss);
    for (double& v : x) v *= f;
    return x;
}

template <std::uniform_random_bit_generator G>
std::vector<double> gaussian_coefficients(std::size_t n, G& gen) {
    std::vector<double> a(n);
    for (double& v : a) v = standard_normal(gen);
    return a;
}

} // namespace exchmat

#endif
