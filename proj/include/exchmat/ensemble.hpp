#ifndef EXCHMAT_ENSEMBLE_HPP
#define EXCHMAT_ENSEMBLE_HPP

// Seed matrices, shuffled samples and the normalization of general
// exchangeable matrices.
//
// A seed x is a deterministic n x n real matrix with
//   sum_ij x_ij = 0,   sum_ij x_ij^2 = n^2,   K = max |x_ij| (>= 1 by the second).
// A sample is X_ij = x_{pi(i,j)} for a uniform permutation pi of the n^2 cells.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "exchmat/error.hpp"
#include "exchmat/matrix.hpp"
#include "exchmat/rng.hpp"

namespace exchmat {

inline constexpr double kSeedRelTol = 1e-9;

/// Residuals of the two seed constraints, both measured in absolute terms.
struct SeedResiduals {
    double sum = 0.0;      ///< |sum x_ij|
    double sum_sq = 0.0;   ///< |sum x_ij^2 - n^2|
    double max_abs = 0.0;  ///< K
};

inline SeedResiduals seed_residuals(const Matrix& x) {
    const auto n = static_cast<double>(x.rows());
    double s = 0.0, s2 = 0.0, k = 0.0;
    for (double v : x.values()) {
        s += v;
        s2 += v * v;
        k = std::max(k, std::abs(v));
    }
    return {std::abs(s), std::abs(s2 - n * n), k};
}

class SeedMatrix {
public:
    /// Validates the constraints; throws ValidationError reporting both residuals.
    SeedMatrix(Matrix entries, std::string label) : entries_(std::move(entries)), label_(std::move(label)) {
        if (!entries_.square()) throw ValidationError("seed: matrix is not square");
        if (entries_.rows() < 2)
            throw ValidationError("seed: n must be >= 2 (no 1x1 matrix has zero sum and unit square sum)");
        if (!all_finite(entries_)) throw ValidationError("seed: non-finite entry");
        const auto r = seed_residuals(entries_);
        const double n = static_cast<double>(entries_.rows());
        const double tol = kSeedRelTol * n * n;
        if (r.sum > tol || r.sum_sq > tol) {
            std::ostringstream os;
            os.precision(17);
            os << "seed: constraint violation: (A1) residual = " << r.sum << ", (A2) residual = " << r.sum_sq
               << " (tolerance " << tol << ")";
            throw ValidationError(os.str());
        }
        k_ = r.max_abs;
    }

    std::size_t n() const noexcept { return entries_.rows(); }
    double K() const noexcept { return k_; }
    const Matrix& entries() const noexcept { return entries_; }
    const std::string& label() const noexcept { return label_; }

private:
    Matrix entries_;
    std::string label_;
    double k_ = 0.0;
};

struct Provenance {
    std::string seed_label;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::uint64_t> substream;
};

/// A shuffled realization X. Entries are a permutation of the seed's entries.
struct SampleMatrix {
    Matrix entries;
    double K = 0.0;
    Provenance provenance;

    std::size_t n() const noexcept { return entries.rows(); }
};

// ---------------------------------------------------------------------------
// Seed constructors

/// Balanced +-1 seed. For odd n one cell is 0 and the others are +-n/sqrt(n^2-1).
inline SeedMatrix rademacher_seed(std::size_t n) {
    if (n < 2) throw ValidationError("rademacher seed: n must be >= 2");
    const std::size_t cells = n * n;
    std::vector<double> v(cells, 0.0);
    if (cells % 2 == 0) {
        std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cells / 2), 1.0);
        std::fill(v.begin() + static_cast<std::ptrdiff_t>(cells / 2), v.end(), -1.0);
    } else {
        const double nd = static_cast<double>(n);
        const double c = nd / std::sqrt(nd * nd - 1.0);
        const std::size_t half = (cells - 1) / 2;
        std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half), c);
        std::fill(v.begin() + static_cast<std::ptrdiff_t>(half), v.end() - 1, -c);
    }
    return SeedMatrix(Matrix(n, n, std::move(v)), "rademacher");
}

/// Sparse seed: an even number m ~ density*n^2 of leading cells with alternating
/// sign, scaled so the square sum is n^2. The realized K is n/sqrt(m).
inline SeedMatrix sparse_seed(std::size_t n, double density, double k_target = 1.0) {
    if (n < 2) throw ValidationError("sparse seed: n must be >= 2");
    if (!(density > 0.0 && density <= 1.0)) throw ValidationError("sparse seed: density must lie in (0, 1]");
    if (!(k_target > 0.0)) throw ValidationError("sparse seed: k_target must be positive");
    const std::size_t cells = n * n;
    auto m = static_cast<std::size_t>(std::ceil(density * static_cast<double>(cells)));
    m = std::clamp<std::size_t>(m, 2, cells);
    if (m % 2 == 1) m = (m < cells) ? m + 1 : m - 1;
    std::vector<double> v(cells, 0.0);
    for (std::size_t k = 0; k < m; ++k) v[k] = (k % 2 == 0) ? k_target : -k_target;
    const double scale = static_cast<double>(n) / (k_target * std::sqrt(static_cast<double>(m)));
    for (double& x : v) x *= scale;
    return SeedMatrix(Matrix(n, n, std::move(v)), "sparse");
}

/// Centered, rescaled i.i.d. Gaussian entries.
template <std::uniform_random_bit_generator G>
SeedMatrix gaussian_seed(std::size_t n, G& gen) {
    if (n < 2) throw ValidationError("gaussian seed: n must be >= 2");
    const std::size_t cells = n * n;
    std::vector<double> v(cells);
    for (double& x : v) x = standard_normal(gen);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(cells);
    double ss = 0.0;
    for (double& x : v) {
        x -= mean;
        ss += x * x;
    }
    const double scale = static_cast<double>(n) / std::sqrt(ss);
    for (double& x : v) x *= scale;
    return SeedMatrix(Matrix(n, n, std::move(v)), "gaussian_normalized");
}

inline SeedMatrix seed_from_entries(std::size_t n, std::vector<double> values) {
    if (values.size() != n * n)
        throw ValidationError("seed: expected " + std::to_string(n * n) + " entries, got " +
                              std::to_string(values.size()));
    return SeedMatrix(Matrix(n, n, std::move(values)), "from_entries");
}

struct RademacherKind {};
struct SparseKind {
    double density = 0.1;
    double k_target = 1.0;
};
struct GaussianKind {};
struct FromEntriesKind {
    std::vector<double> values;
};
using SeedKind = std::variant<RademacherKind, SparseKind, GaussianKind, FromEntriesKind>;

/// Dispatching constructor. `gen` is only consumed by the Gaussian kind.
template <std::uniform_random_bit_generator G>
SeedMatrix make_seed(const SeedKind& kind, std::size_t n, G* gen) {
    return std::visit(
        [&](const auto& k) -> SeedMatrix {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, RademacherKind>) {
                return rademacher_seed(n);
            } else if constexpr (std::is_same_v<K, SparseKind>) {
                return sparse_seed(n, k.density, k.k_target);
            } else if constexpr (std::is_same_v<K, GaussianKind>) {
                if (gen == nullptr) throw ValidationError("gaussian seed requires a random stream");
                return gaussian_seed(n, *gen);
            } else {
                return seed_from_entries(n, k.values);
            }
        },
        kind);
}

inline SeedMatrix make_seed(const SeedKind& kind, std::size_t n) {
    return make_seed<RngStream>(kind, n, nullptr);
}

// ---------------------------------------------------------------------------
// Shuffling

/// X_c = x_{pi(c)} over the n^2 cells in row-major order.
template <std::uniform_random_bit_generator G>
SampleMatrix shuffle(const SeedMatrix& seed, G& gen) {
    const std::size_t n = seed.n();
    const Permutation pi = sample_permutation(gen, n * n);
    Matrix x(n, n);
    auto src = seed.entries().values();
    auto dst = x.values();
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[pi[c]];
    SampleMatrix s{std::move(x), seed.K(), {seed.label(), std::nullopt, std::nullopt}};
    if constexpr (std::is_same_v<G, RngStream>) {
        s.provenance.master_seed = gen.master_seed();
        s.provenance.substream = gen.stream_id();
    }
    return s;
}

// ---------------------------------------------------------------------------
// Normalization of general exchangeable matrices

struct NormalizationStats {
    double mu = 0.0;
    double sigma = 0.0;
};

struct Normalized {
    Matrix B;
    NormalizationStats stats;
};

/// B = (Y - mu) / (sqrt(n) sigma) with mu the grand mean and sigma the RMS deviation.
inline Normalized normalize_exchangeable(const Matrix& y) {
    if (!y.square() || y.rows() == 0) throw DomainError("normalize_exchangeable: need a nonempty square matrix");
    const double cells = static_cast<double>(y.size());
    double mu = 0.0, scale = 0.0;
    for (double v : y.values()) {
        mu += v;
        scale = std::max(scale, std::abs(v));
    }
    mu /= cells;
    double var = 0.0;
    for (double v : y.values()) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / cells);
    if (!(sigma > 1e-13 * scale) || sigma == 0.0)
        throw DegenerateError("normalize_exchangeable: sigma_n = 0 (all entries equal)");
    const double f = 1.0 / (std::sqrt(static_cast<double>(y.rows())) * sigma);
    Matrix b(y.rows(), y.cols());
    for (std::size_t k = 0; k < y.size(); ++k) b.values()[k] = (y.values()[k] - mu) * f;
    return {std::move(b), {mu, sigma}};
}

// ---------------------------------------------------------------------------
// Brute-force moment oracle

struct PairMoments {
    double mean = 0.0;              ///< E X_11
    double second_moment = 0.0;     ///< E X_11^2
    double cross_covariance = 0.0;  ///< E X_11 X_12
    std::uint64_t permutations = 0;
};

/// Exact moments by enumerating all (n^2)! cell permutations; n <= 3 only.
inline PairMoments exact_pair_moments(const SeedMatrix& seed) {
    if (seed.n() > 3) throw EnumerationLimit("exact_pair_moments: n > 3 needs more than 9! permutations");
    auto x = seed.entries().values();
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    long double s1 = 0, s2 = 0, s12 = 0;
    std::uint64_t count = 0;
    do {
        const long double a = x[idx[0]];
        const long double b = x[idx[1]];
        s1 += a;
        s2 += a * a;
        s12 += a * b;
        ++count;
    } while (std::next_permutation(idx.begin(), idx.end()));
    const long double c = static_cast<long double>(count);
    return {static_cast<double>(s1 / c), static_cast<double>(s2 / c), static_cast<double>(s12 / c), count};
}

} // namespace exchmat

#endif
