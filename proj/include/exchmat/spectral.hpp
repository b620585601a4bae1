#ifndef EXCHMAT_SPECTRAL_HPP
#define EXCHMAT_SPECTRAL_HPP

// Empirical spectral distributions and their limit laws.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exchmat/ensemble.hpp"
#include "exchmat/error.hpp"
#include "exchmat/linalg.hpp"

namespace exchmat {

/// Eigenvalues of A = X / sqrt(n), canonical order.
struct ESD {
    std::vector<cplx> points;

    std::size_t size() const noexcept { return points.size(); }

    double second_moment() const {
        double s = 0.0;
        for (cplx p : points) s += std::norm(p);
        return s / static_cast<double>(points.size());
    }
    std::vector<double> radii() const {
        std::vector<double> r;
        r.reserve(points.size());
        for (cplx p : points) r.push_back(std::abs(p));
        return r;
    }
    std::vector<double> angles() const {
        std::vector<double> a;
        a.reserve(points.size());
        for (cplx p : points) a.push_back(std::arg(p));
        return a;
    }
};

inline ESD esd(const Matrix& x) {
    const double f = 1.0 / std::sqrt(static_cast<double>(x.rows()));
    return ESD{eigenvalues(scaled(x, f)).values};
}

inline ESD esd(const SampleMatrix& sample) { return esd(sample.entries); }

// ---------------------------------------------------------------------------
// Reference laws

enum class Law { circular_radial, quarter_circle, gaussian, uniform_angle };

struct Reference {
    Law law = Law::circular_radial;
    double sigma = 1.0;  ///< only used by Law::gaussian
};

inline std::string to_string(Law law) {
    switch (law) {
    case Law::circular_radial: return "circular_radial";
    case Law::quarter_circle: return "quarter_circle";
    case Law::gaussian: return "gaussian";
    case Law::uniform_angle: return "uniform_angle";
    }
    return "unknown";
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double reference_cdf(const Reference& ref, double x) {
    constexpr double pi = std::numbers::pi;
    switch (ref.law) {
    case Law::circular_radial:
        if (x <= 0.0) return 0.0;
        return std::min(x * x, 1.0);
    case Law::quarter_circle:
        if (x <= 0.0) return 0.0;
        if (x >= 2.0) return 1.0;
        return (0.5 * x * std::sqrt(4.0 - x * x) + 2.0 * std::asin(0.5 * x)) / pi;
    case Law::gaussian:
        if (!(ref.sigma > 0.0)) throw DomainError("reference_cdf: gaussian sigma must be positive");
        return normal_cdf(x / ref.sigma);
    case Law::uniform_angle:
        if (x <= -pi) return 0.0;
        if (x >= pi) return 1.0;
        return (x + pi) / (2.0 * pi);
    }
    return 0.0;
}

struct KSResult {
    double statistic = 0.0;
    std::size_t sample_size = 0;
    std::string reference;
};

/// sup_x |F_hat(x) - F(x)| over both one-sided limits at every jump.
inline KSResult ks_statistic(std::span<const double> samples, const Reference& ref) {
    if (samples.empty()) throw DomainError("ks_statistic: empty sample");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double m = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = reference_cdf(ref, s[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return {std::clamp(d, 0.0, 1.0), s.size(), to_string(ref.law)};
}

/// KS distance between a finite discrete law {(value, probability)} and a continuous reference.
inline double ks_statistic_discrete(std::vector<std::pair<double, double>> atoms, const Reference& ref) {
    if (atoms.empty()) throw DomainError("ks_statistic_discrete: empty law");
    std::sort(atoms.begin(), atoms.end());
    double cdf = 0.0, d = 0.0;
    for (const auto& [value, prob] : atoms) {
        const double f = reference_cdf(ref, value);
        d = std::max(d, std::abs(f - cdf));
        cdf += prob;
        d = std::max(d, std::abs(cdf - f));
    }
    return std::clamp(d, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Logarithmic potential

/// -(1/n) sum_k log s_k(A - z Id). Throws DegenerateError naming the first
/// singular value at or below 1e-12.
inline double log_potential_empirical(const Matrix& a, cplx z) {
    const SingularSpectrum sv = singular_values_shifted(a, z);
    double s = 0.0;
    for (std::size_t k = 0; k < sv.size(); ++k) {
        if (!(sv.values[k] > 1e-12))
            throw DegenerateError("log_potential_empirical: singular shift, s_" + std::to_string(k + 1) + " = " +
                                  std::to_string(sv.values[k]) + " <= 1e-12");
        s += std::log(sv.values[k]);
    }
    return -s / static_cast<double>(sv.size());
}

/// Limit potential of the circular law: -log|z| outside the unit disc, (1 - |z|^2)/2 inside.
inline double log_potential_limit(cplx z) {
    const double r = std::abs(z);
    return r > 1.0 ? -std::log(r) : 0.5 * (1.0 - r * r);
}

/// (1/n) sum_k |log s_k| 1{|log s_k| > t}; +infinity when some s_k = 0.
inline double uniform_integrability_stat(const SingularSpectrum& sv, double t) {
    if (!(t > 0.0)) throw DomainError("uniform_integrability_stat: t must be positive");
    if (sv.values.empty()) throw DomainError("uniform_integrability_stat: empty spectrum");
    double s = 0.0;
    for (double v : sv.values) {
        if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
        const double l = std::abs(std::log(v));
        if (l > t) s += l;
    }
    return s / static_cast<double>(sv.size());
}

} // namespace exchmat

#endif
