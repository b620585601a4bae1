#ifndef EXCHMAT_SSV_HPP
#define EXCHMAT_SSV_HPP

// Monte-Carlo experiments on the smallest singular value of X - z sqrt(n) Id,
// distances of rows to the span of earlier rows, and the lower bound on
// intermediate singular values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exchmat/ensemble.hpp"
#include "exchmat/error.hpp"
#include "exchmat/linalg.hpp"
#include "exchmat/parallel.hpp"

namespace exchmat {

/// Raised when sqrt(n) s_n drops to 1e-6 or below for n >= 100; the message carries full provenance.
class PositivityViolation : public NumericFailure {
public:
    using NumericFailure::NumericFailure;
};

struct SsvExperiment {
    std::size_t n = 0;
    SeedKind seed_kind = RademacherKind{};
    cplx z{0.0, 0.0};
    std::vector<double> epsilons;
    std::size_t trials = 1;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (n < 2) throw ValidationError("ssv: n must be >= 2");
        if (trials < 1) throw ValidationError("ssv: trials must be >= 1");
        if (epsilons.empty()) throw ValidationError("ssv: epsilon grid is empty");
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
            if (!(epsilons[i] > 0.0)) throw ValidationError("ssv: epsilons must be positive");
            if (i > 0 && !(epsilons[i] > epsilons[i - 1]))
                throw ValidationError("ssv: epsilons must be strictly increasing");
        }
    }
};

/// Substream reserved for drawing a random seed matrix (Gaussian kind).
inline constexpr std::uint64_t kSeedSubstream = 0xffffffffffffffffULL;

inline SeedMatrix build_seed(const SeedKind& kind, std::size_t n, std::uint64_t master_seed) {
    RngStream rng(master_seed, kSeedSubstream);
    return make_seed(kind, n, &rng);
}

/// Wilson score interval at 95%.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double zq = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    const double m = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / m;
    const double z2 = zq * zq;
    const double centre = (p + z2 / (2.0 * m)) / (1.0 + z2 / m);
    const double half = zq * std::sqrt(p * (1.0 - p) / m + z2 / (4.0 * m * m)) / (1.0 + z2 / m);
    // the endpoints are exactly 0 and 1 at p = 0 and p = 1; keep rounding from moving them
    const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

struct SsvTailRow {
    double epsilon = 0.0;
    double threshold = 0.0;  ///< epsilon n^{-1/2} / (K + |z|)
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct SsvTailCurve {
    std::vector<SsvTailRow> rows;
    std::vector<double> smallest;  ///< s_n(X - z sqrt(n) Id) per trial; NaN for failed trials
    std::size_t trials = 0;
    std::size_t failures = 0;
    double min_sqrt_n_sn = std::numeric_limits<double>::infinity();
    double K = 0.0;
};

namespace detail {
inline std::string provenance_dump(const SsvExperiment& e, std::size_t trial, double value) {
    std::ostringstream os;
    os.precision(17);
    os << "smallest singular value positivity violated: sqrt(n) s_n = " << value << " (n = " << e.n << ", z = "
       << e.z.real() << (e.z.imag() < 0 ? "" : "+") << e.z.imag() << "i, master_seed = " << e.master_seed
       << ", substream = " << trial << ")";
    return os.str();
}
} // namespace detail

inline SsvTailCurve ssv_tail_curve(const SsvExperiment& e, std::size_t threads = 1) {
    e.validate();
    const SeedMatrix seed = build_seed(e.seed_kind, e.n, e.master_seed);
    const double sqrt_n = std::sqrt(static_cast<double>(e.n));
    const cplx shift = e.z * sqrt_n;

    struct Trial {
        double sn;
        bool failed;
    };
    const auto results = run_trials(e.trials, threads, [&](std::size_t t) -> Trial {
        RngStream rng(e.master_seed, t);
        const SampleMatrix x = shuffle(seed, rng);
        try {
            return {singular_values_shifted(x.entries, shift).smallest(), false};
        } catch (const NumericFailure&) {
            return {std::numeric_limits<double>::quiet_NaN(), true};
        }
    });

    SsvTailCurve curve;
    curve.trials = e.trials;
    curve.K = seed.K();
    for (std::size_t t = 0; t < results.size(); ++t) {
        curve.smallest.push_back(results[t].sn);
        if (results[t].failed) {
            ++curve.failures;
            continue;
        }
        const double v = sqrt_n * results[t].sn;
        curve.min_sqrt_n_sn = std::min(curve.min_sqrt_n_sn, v);
        if (e.n >= 100 && !(v > 1e-6)) throw PositivityViolation(detail::provenance_dump(e, t, v));
    }
    const std::size_t ok = e.trials - curve.failures;
    for (double eps : e.epsilons) {
        SsvTailRow row;
        row.epsilon = eps;
        row.threshold = eps / (sqrt_n * (seed.K() + std::abs(e.z)));
        std::size_t hits = 0;
        for (const auto& r : results)
            if (!r.failed && r.sn <= row.threshold) ++hits;
        row.p_hat = ok ? static_cast<double>(hits) / static_cast<double>(ok) : 0.0;
        std::tie(row.ci_lo, row.ci_hi) = wilson_interval(hits, ok);
        curve.rows.push_back(row);
    }
    return curve;
}

// ---------------------------------------------------------------------------

struct DistanceRatioSummary {
    double min = 0.0;
    double median = 0.0;
    double mean = 0.0;
    std::size_t trials = 0;
    std::size_t degenerate = 0;  ///< trials where row k+1 lay in the span (dist <= 1e-9 |Z_{k+1}|)
    std::vector<double> ratios;
};

/// dist(Z_{k+1}, span(Z_1..Z_k)) / sqrt(n - k) for the rows Z_i of X - sqrt(n) z Id.
inline DistanceRatioSummary distance_ratio_stats(const SeedMatrix& seed, std::size_t k, cplx z, std::size_t trials,
                                                 std::uint64_t master_seed, std::size_t threads = 1) {
    const std::size_t n = seed.n();
    if (k + 2 > n) throw DomainError("distance_ratio_stats: need k <= n - 2");
    if (trials == 0) throw DomainError("distance_ratio_stats: trials must be >= 1");
    const cplx shift = z * std::sqrt(static_cast<double>(n));
    struct Trial {
        double ratio;
        bool degenerate;
    };
    const auto res = run_trials(trials, threads, [&](std::size_t t) -> Trial {
        RngStream rng(master_seed, t);
        const CMatrix zrows = shifted(shuffle(seed, rng).entries, shift);
        CMatrix span_rows(k, n);
        for (std::size_t i = 0; i < k; ++i)
            std::copy(zrows.row(i).begin(), zrows.row(i).end(), span_rows.row(i).begin());
        const auto v = zrows.row(k);
        double vnorm = 0.0;
        for (cplx c : v) vnorm += std::norm(c);
        const double d = distance_to_row_span(span_rows, v);
        return {d / std::sqrt(static_cast<double>(n - k)), d <= 1e-9 * std::sqrt(vnorm)};
    });
    DistanceRatioSummary s;
    s.trials = trials;
    for (const auto& r : res) {
        s.ratios.push_back(r.ratio);
        if (r.degenerate) ++s.degenerate;
    }
    std::vector<double> sorted = s.ratios;
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    const std::size_t m = sorted.size();
    s.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    for (double r : sorted) s.mean += r;
    s.mean /= static_cast<double>(m);
    return s;
}

// ---------------------------------------------------------------------------

struct IntermediateCheck {
    bool holds = true;
    double worst_ratio = std::numeric_limits<double>::infinity();  ///< min over i of s_{n-i} n / i
};

/// Checks s_{n-i}(A - z Id) >= c_probe i / n for ceil(n^gamma) <= i <= n - 1,
/// singular values indexed 1..n in nonincreasing order.
inline IntermediateCheck intermediate_sv_check(const SingularSpectrum& sv, double gamma, double c_probe) {
    if (!(c_probe > 0.0)) throw DomainError("intermediate_sv_check: c_probe must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("intermediate_sv_check: gamma must lie in (0, 1)");
    const std::size_t n = sv.size();
    const double nd = static_cast<double>(n);
    const auto first = static_cast<std::size_t>(std::ceil(std::pow(nd, gamma)));
    IntermediateCheck r;
    for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 <= n; ++i) {
        const double s = sv.values[n - i - 1];  // s_{n-i}
        const double ratio = s * nd / static_cast<double>(i);
        r.worst_ratio = std::min(r.worst_ratio, ratio);
        if (ratio < c_probe) r.holds = false;
    }
    return r;
}

inline IntermediateCheck intermediate_sv_check(const Matrix& a, cplx z, double gamma, double c_probe) {
    return intermediate_sv_check(singular_values_shifted(a, z), gamma, c_probe);
}

// ---------------------------------------------------------------------------

struct NegSecondMoment {
    double lhs = 0.0;  ///< sum_j s_j(B)^-2
    double rhs = 0.0;  ///< sum_j dist(Z_j, H_j)^-2
    double discrepancy = 0.0;
};

/// Compares both sides of sum s_j^-2 = sum dist(Z_j, H_j)^-2, H_j the span of the other rows.
inline NegSecondMoment neg_second_moment_check(const CMatrix& b) {
    const std::size_t k = b.rows(), n = b.cols();
    if (k == 0 || k > n) throw DomainError("neg_second_moment_check: need 1 <= k <= n");
    const SingularSpectrum sv = singular_values(b);
    if (!(sv.smallest() > 1e-10 * sv.largest()))
        throw DegenerateError("neg_second_moment_check: rank-deficient input");
    NegSecondMoment r;
    for (double s : sv.values) r.lhs += 1.0 / (s * s);
    CMatrix others(k - 1, n);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0, o = 0; i < k; ++i) {
            if (i == j) continue;
            std::copy(b.row(i).begin(), b.row(i).end(), others.row(o++).begin());
        }
        const double d = distance_to_row_span(others, b.row(j));
        // Gram-based singular values cannot see exact rank loss below ~1e-8 |B|; the distances can
        if (!(d > 1e-10 * sv.largest())) throw DegenerateError("neg_second_moment_check: rank-deficient input");
        r.rhs += 1.0 / (d * d);
    }
    r.discrepancy = std::abs(r.lhs - r.rhs) / r.lhs;
    return r;
}

} // namespace exchmat

#endif
