#ifndef EXCHMAT_CONCENTRATION_HPP
#define EXCHMAT_CONCENTRATION_HPP

// Empirical harness for concentration of convex Lipschitz functionals of a
// uniformly shuffled vector: P(|Z - EZ| >= t) <= 2 exp(-c t^2 / L^2) and
// ||Z||_p <= ||Z||_1 + C L sqrt(p).
//
// Entries x in [-K, K] correspond to u = (x + K) / (2K) in [0, 1]; a
// functional that is L-Lipschitz in x is 2K L-Lipschitz in u. Tail statements
// keep Z on its original scale and use L' = 2K L.
//
// Convexity and Lipschitz constants (Euclidean metric on the n^2 entry vector):
//   operator_norm              ||X||          convex (norm), 1-Lipschitz (||.|| <= ||.||_HS)
//   linear(v)                  <v, vec X>     linear, |v|-Lipschitz
//   distance_to_fixed_subspace dist(X_1, S)   convex (distance to a subspace), 1-Lipschitz
//   hs_norm_of_submatrix(R)    ||X_R||_HS     convex (norm of a linear image), 1-Lipschitz

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "exchmat/ensemble.hpp"
#include "exchmat/error.hpp"
#include "exchmat/linalg.hpp"
#include "exchmat/parallel.hpp"

namespace exchmat {

struct OperatorNormFunctional {};
struct LinearFunctional {
    std::vector<double> v;  ///< n^2 weights, row-major
};
struct SubspaceDistanceFunctional {
    Matrix rows;  ///< k x n, spans the fixed subspace; Z = distance of the first row of X to it
};
struct SubmatrixHSFunctional {
    std::vector<std::size_t> rows;
};

using FunctionalKind =
    std::variant<OperatorNormFunctional, LinearFunctional, SubspaceDistanceFunctional, SubmatrixHSFunctional>;

class FunctionalSpec {
public:
    explicit FunctionalSpec(FunctionalKind kind) : kind_(std::move(kind)) {
        if (const auto* lin = std::get_if<LinearFunctional>(&kind_)) {
            double s = 0.0;
            for (double w : lin->v) s += w * w;
            lipschitz_ = std::sqrt(s);
        }
    }

    const FunctionalKind& kind() const noexcept { return kind_; }
    /// Lipschitz constant in the entry metric. A zero linear functional reports 0.
    double lipschitz() const noexcept { return lipschitz_; }

    double operator()(const Matrix& x) const {
        return std::visit([&](const auto& k) { return evaluate(k, x); }, kind_);
    }

private:
    static double evaluate(const OperatorNormFunctional&, const Matrix& x) {
        return singular_values_shifted(x, 0.0).largest();
    }
    static double evaluate(const LinearFunctional& f, const Matrix& x) {
        if (f.v.size() != x.size()) throw DomainError("linear functional: weight vector has wrong length");
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += f.v[k] * x.values()[k];
        return s;
    }
    static double evaluate(const SubspaceDistanceFunctional& f, const Matrix& x) {
        if (f.rows.cols() != x.cols()) throw DomainError("subspace functional: dimension mismatch");
        const CMatrix rows = to_complex(f.rows);
        std::vector<cplx> v(x.row(0).begin(), x.row(0).end());
        return distance_to_row_span(rows, v);
    }
    static double evaluate(const SubmatrixHSFunctional& f, const Matrix& x) {
        double s = 0.0;
        for (std::size_t r : f.rows) {
            if (r >= x.rows()) throw DomainError("submatrix functional: row index out of range");
            for (double v : x.row(r)) s += v * v;
        }
        return std::sqrt(s);
    }

    FunctionalKind kind_;
    double lipschitz_ = 1.0;
};

struct FunctionalSamples {
    std::vector<double> draws;
    double lipschitz_scaled = 0.0;  ///< L' = 2 K L
};

/// Serial draws from one generator (used with stub generators in tests).
template <std::uniform_random_bit_generator G>
FunctionalSamples sample_functional(const FunctionalSpec& spec, const SeedMatrix& seed, G& gen, std::size_t trials) {
    if (trials == 0) throw DomainError("sample_functional: trials must be >= 1");
    FunctionalSamples out;
    out.lipschitz_scaled = 2.0 * seed.K() * spec.lipschitz();
    out.draws.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) out.draws.push_back(spec(shuffle(seed, gen).entries));
    return out;
}

/// Trial t draws its permutation from substream first_stream + t.
inline FunctionalSamples sample_functional(const FunctionalSpec& spec, const SeedMatrix& seed,
                                           std::uint64_t master_seed, std::size_t trials, std::size_t threads = 1,
                                           std::uint64_t first_stream = 0) {
    if (trials == 0) throw DomainError("sample_functional: trials must be >= 1");
    FunctionalSamples out;
    out.lipschitz_scaled = 2.0 * seed.K() * spec.lipschitz();
    out.draws = run_trials(trials, threads, [&](std::size_t t) {
        RngStream rng(master_seed, first_stream + t);
        return spec(shuffle(seed, rng).entries);
    });
    return out;
}

struct TailPoint {
    double t = 0.0;
    double empirical_tail = 0.0;
    double bound = 0.0;  ///< 2 exp(-c_hat t^2 / L^2)
};

struct MomentPoint {
    double p = 0.0;
    double norm_p = 0.0;
};

struct TailFit {
    double c_hat = 0.0;
    double C_hat_moment = 0.0;
    std::size_t samples = 0;
    bool degenerate = false;
    double mean = 0.0;
    double sd = 0.0;
    std::vector<TailPoint> tail;
    std::vector<MomentPoint> moments;  ///< p in {1, 2, 4, 8}
};

inline constexpr std::size_t kTailGridPoints = 20;
inline constexpr std::size_t kMinTailSamples = 1000;

/// Lp norm (E|Z|^p)^(1/p) of an empirical sample.
inline double empirical_norm(std::span<const double> z, double p) {
    double s = 0.0;
    for (double v : z) s += std::pow(std::abs(v), p);
    return std::pow(s / static_cast<double>(z.size()), 1.0 / p);
}

inline TailFit tail_fit(std::span<const double> samples, double lipschitz) {
    if (samples.size() < kMinTailSamples) throw DomainError("tail_fit: need at least 1000 samples");
    if (!(lipschitz > 0.0)) throw DomainError("tail_fit: Lipschitz constant must be positive");
    TailFit fit;
    fit.samples = samples.size();
    const double m = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= m;
    double var = 0.0, maxdev = 0.0;
    std::vector<double> dev(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        dev[i] = std::abs(samples[i] - mean);
        var += dev[i] * dev[i];
        maxdev = std::max(maxdev, dev[i]);
    }
    fit.mean = mean;
    fit.sd = std::sqrt(var / m);

    for (double p : {1.0, 2.0, 4.0, 8.0}) fit.moments.push_back({p, empirical_norm(samples, p)});

    if (!(fit.sd > 1e-14 * std::max(1.0, std::abs(mean)))) {
        fit.degenerate = true;
        fit.c_hat = std::numeric_limits<double>::infinity();
        return fit;
    }

    std::sort(dev.begin(), dev.end());
    const double lo = 0.5 * fit.sd;
    const double l2 = lipschitz * lipschitz;
    double c_hat = std::numeric_limits<double>::infinity();
    std::vector<double> grid(kTailGridPoints);
    for (std::size_t g = 0; g < kTailGridPoints; ++g)
        grid[g] = lo + (maxdev - lo) * static_cast<double>(g) / static_cast<double>(kTailGridPoints - 1);
    for (double t : grid) {
        const auto first = std::lower_bound(dev.begin(), dev.end(), t);
        const double tail = static_cast<double>(dev.end() - first) / m;
        fit.tail.push_back({t, tail, 0.0});
        if (tail > 0.0) c_hat = std::min(c_hat, -l2 * std::log(tail / 2.0) / (t * t));
    }
    fit.c_hat = c_hat;
    for (auto& pt : fit.tail) pt.bound = 2.0 * std::exp(-c_hat * pt.t * pt.t / l2);

    const double norm1 = fit.moments[0].norm_p;
    double cm = 0.0;
    for (std::size_t k = 1; k < fit.moments.size(); ++k) {
        const auto& mp = fit.moments[k];
        cm = std::max(cm, (mp.norm_p - norm1) / (lipschitz * std::sqrt(mp.p)));
    }
    fit.C_hat_moment = cm;
    return fit;
}

/// DKW-type slack 3 sqrt(log m / m) used when comparing empirical tails to the fitted curve.
inline double tail_slack(std::size_t samples) {
    const double m = static_cast<double>(samples);
    return 3.0 * std::sqrt(std::log(m) / m);
}

/// True when every grid tail lies under 2 exp(-c_hat t^2 / L^2) plus the DKW slack.
inline bool tails_dominated(const TailFit& fit, double lipschitz) {
    if (fit.degenerate) return true;
    const double slack = tail_slack(fit.samples);
    const double l2 = lipschitz * lipschitz;
    return std::all_of(fit.tail.begin(), fit.tail.end(), [&](const TailPoint& p) {
        return p.empirical_tail <= 2.0 * std::exp(-fit.c_hat * p.t * p.t / l2) + slack;
    });
}

} // namespace exchmat

#endif
