#ifndef EXCHMAT_LINALG_HPP
#define EXCHMAT_LINALG_HPP

// Self-contained dense kernels.
//
//  * eigenvalues of a real nonsymmetric matrix: radix-2 balancing, Householder
//    reduction to upper Hessenberg form, Francis implicit double-shift QR
//    (after EISPACK hqr).
//  * eigenvalues of a complex Hermitian matrix: Householder reduction to a
//    real symmetric tridiagonal matrix, implicit-shift QL (after EISPACK tql1).
//  * singular values through the Hermitian Gram matrix M*M (or MM*).
//
// Singular values from the Gram matrix carry an absolute error of roughly
// eps * ||M||^2 / (2 s) on s, i.e. ~1e-13 / s for ||M|| ~ 30. The smallest
// thresholds probed by the labs (~1e-4) sit far above that floor.
//
// Complex products in the inner loops are written out on (re, im) pairs in a
// fixed operation order: (a.re*b.re - a.im*b.im, a.re*b.im + a.im*b.re).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "exchmat/error.hpp"
#include "exchmat/matrix.hpp"

namespace exchmat {

/// Hidden debugging switch: when set, kernels print iteration traces to stderr.
inline std::atomic<bool>& kernel_trace() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace detail {

inline cplx cmul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
/// conj(a) * b
inline cplx cmulc(cplx a, cplx b) {
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

inline double sign_of(double magnitude, double s) { return s >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

} // namespace detail

/// Eigenvalue multiset, canonical order lexicographic in (re, im).
struct ComplexSpectrum {
    std::vector<cplx> values;

    void canonicalize() {
        std::sort(values.begin(), values.end(), [](cplx a, cplx b) {
            return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
        });
    }
};

/// Nonnegative, nonincreasing singular values.
struct SingularSpectrum {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double largest() const { return values.front(); }
    double smallest() const { return values.back(); }
};

// ---------------------------------------------------------------------------
// Hessenberg reduction

struct HessenbergForm {
    Matrix H;  ///< upper Hessenberg
    Matrix Q;  ///< orthogonal, A = Q H Q^T
};

namespace detail {

/// Householder reduction in place; accumulates Q when q != nullptr.
inline void reduce_to_hessenberg(Matrix& h, Matrix* q) {
    const std::size_t n = h.rows();
    if (n < 3) return;
    std::vector<double> v(n);
    std::vector<double> w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(h(i, k));
        if (scale == 0.0) continue;
        double norm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = h(i, k) / scale;
            norm2 += v[i] * v[i];
        }
        const double alpha = -sign_of(std::sqrt(norm2), v[k + 1]);
        v[k + 1] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        const double tau = 2.0 / vnorm2;

        // rows k+1.. : H <- (I - tau v v^T) H
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double vi = v[i];
            auto hrow = h.row(i);
            for (std::size_t j = k; j < n; ++j) w[j] += vi * hrow[j];
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = tau * v[i];
            auto hrow = h.row(i);
            for (std::size_t j = k; j < n; ++j) hrow[j] -= f * w[j];
        }
        // columns k+1.. : H <- H (I - tau v v^T)
        for (std::size_t i = 0; i < n; ++i) {
            auto hrow = h.row(i);
            double dot = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) dot += hrow[j] * v[j];
            dot *= tau;
            for (std::size_t j = k + 1; j < n; ++j) hrow[j] -= dot * v[j];
        }
        if (q != nullptr) {
            for (std::size_t i = 0; i < n; ++i) {
                auto qrow = q->row(i);
                double dot = 0.0;
                for (std::size_t j = k + 1; j < n; ++j) dot += qrow[j] * v[j];
                dot *= tau;
                for (std::size_t j = k + 1; j < n; ++j) qrow[j] -= dot * v[j];
            }
        }
        h(k + 1, k) = alpha * scale;
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

/// Radix-2 diagonal similarity scaling (EISPACK balanc without permutations).
inline void balance(Matrix& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    const std::size_t n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
inline std::vector<cplx> hessenberg_qr(Matrix& h) {
    const int n = static_cast<int>(h.rows());
    std::vector<cplx> roots(static_cast<std::size_t>(n));
    if (n == 0) return roots;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const bool trace = kernel_trace().load(std::memory_order_relaxed);

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(h(i, j));

    const long budget = 30L * n;
    long total = 0;
    int nn = n - 1;
    int its = 0;
    double t = 0.0;
    while (nn >= 0) {
        int l = nn;
        while (l >= 1) {
            double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
            if (s == 0.0) s = anorm;
            if (std::abs(h(l, l - 1)) <= eps * s) {
                h(l, l - 1) = 0.0;
                break;
            }
            --l;
        }
        double x = h(nn, nn);
        if (l == nn) {
            roots[nn] = {x + t, 0.0};
            --nn;
            its = 0;
            continue;
        }
        double y = h(nn - 1, nn - 1);
        double w = h(nn, nn - 1) * h(nn - 1, nn);
        if (l == nn - 1) {
            const double p = 0.5 * (y - x);
            const double q = p * p + w;
            double z = std::sqrt(std::abs(q));
            x += t;
            if (q >= 0.0) {
                z = p + sign_of(z, p);
                const double hi = x + z;
                roots[nn - 1] = {hi, 0.0};
                roots[nn] = {z != 0.0 ? x - w / z : hi, 0.0};
            } else {
                roots[nn - 1] = {x + p, -z};
                roots[nn] = {x + p, z};
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if (++total > budget)
            throw NumericFailure("eigenvalues: no convergence after " + std::to_string(budget) +
                                 " QR sweeps; stuck block rows " + std::to_string(l) + ".." + std::to_string(nn));
        if (its > 0 && its % 10 == 0) {
            // exceptional shift
            t += x;
            for (int i = 0; i <= nn; ++i) h(i, i) -= x;
            const double s = std::abs(h(nn, nn - 1)) + std::abs(h(nn - 1, nn - 2));
            x = y = 0.75 * s;
            w = -0.4375 * s * s;
        }
        ++its;
        if (trace)
            std::fprintf(stderr, "[hqr] block %d..%d its %d subdiag %.3e\n", l, nn, its, std::abs(h(nn, nn - 1)));

        int m = nn - 2;
        double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
        for (; m >= l; --m) {
            z = h(m, m);
            r = x - z;
            double s = y - z;
            p = (r * s - w) / h(m + 1, m) + h(m, m + 1);
            q = h(m + 1, m + 1) - z - r - s;
            r = h(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) + std::abs(h(m + 1, m + 1)));
            if (u <= eps * v) break;
        }
        for (int i = m + 2; i <= nn; ++i) {
            h(i, i - 2) = 0.0;
            if (i != m + 2) h(i, i - 3) = 0.0;
        }
        for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
                p = h(k, k - 1);
                q = h(k + 1, k - 1);
                r = (k != nn - 1) ? h(k + 2, k - 1) : 0.0;
                x = std::abs(p) + std::abs(q) + std::abs(r);
                if (x != 0.0) {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            const double s = sign_of(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
                if (l != m) h(k, k - 1) = -h(k, k - 1);
            } else {
                h(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
                p = h(k, j) + q * h(k + 1, j);
                if (k != nn - 1) {
                    p += r * h(k + 2, j);
                    h(k + 2, j) -= p * z;
                }
                h(k + 1, j) -= p * y;
                h(k, j) -= p * x;
            }
            const int mmin = std::min(nn, k + 3);
            for (int i = l; i <= mmin; ++i) {
                p = x * h(i, k) + y * h(i, k + 1);
                if (k != nn - 1) {
                    p += z * h(i, k + 2);
                    h(i, k + 2) -= p * r;
                }
                h(i, k + 1) -= p * q;
                h(i, k) -= p;
            }
        }
    }
    return roots;
}

} // namespace detail

/// Orthogonal similarity to upper Hessenberg form, A = Q H Q^T.
inline HessenbergForm hessenberg(const Matrix& a) {
    if (!a.square() || a.rows() == 0) throw DomainError("hessenberg: need a nonempty square matrix");
    HessenbergForm f{a, Matrix::identity(a.rows())};
    detail::reduce_to_hessenberg(f.H, &f.Q);
    return f;
}

/// All eigenvalues of a real square matrix, in canonical order.
inline ComplexSpectrum eigenvalues(const Matrix& a) {
    if (!a.square() || a.rows() == 0) throw DomainError("eigenvalues: need a nonempty square matrix");
    if (!all_finite(a)) throw DomainError("eigenvalues: non-finite entry");
    Matrix h = a;
    detail::balance(h);
    detail::reduce_to_hessenberg(h, nullptr);
    ComplexSpectrum spec{detail::hessenberg_qr(h)};
    spec.canonicalize();
    return spec;
}

// ---------------------------------------------------------------------------
// Symmetric / Hermitian eigenvalues

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with diagonal d
/// and off-diagonal e (e[i] couples d[i] and d[i+1]). Implicit-shift QL.
inline std::vector<double> tridiagonal_eigenvalues(std::vector<double> d, std::vector<double> e) {
    const std::size_t n = d.size();
    if (n == 0) return d;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const bool trace = kernel_trace().load(std::memory_order_relaxed);
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 30)
                    throw NumericFailure("tridiagonal_eigenvalues: no convergence for eigenvalue " +
                                         std::to_string(l) + " after 30 QL iterations");
                if (trace) std::fprintf(stderr, "[tql] l %zu m %zu iter %d e %.3e\n", l, m, iter, std::abs(e[l]));
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + detail::sign_of(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (std::size_t i = m; i-- > l;) {
                    const double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end());
    return d;
}

/// Eigenvalues (ascending) of a complex Hermitian matrix; only the lower triangle is read.
inline std::vector<double> hermitian_eigenvalues(CMatrix a) {
    using detail::cmul;
    using detail::cmulc;
    if (!a.square()) throw DomainError("hermitian_eigenvalues: matrix is not square");
    const std::size_t n = a.rows();
    if (n == 0) return {};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = std::conj(a(j, i));

    std::vector<cplx> v(n), p(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) xnorm2 += detail::abs2(a(i, k));
        const cplx x0 = a(k + 1, k);
        const double tail2 = xnorm2 - detail::abs2(x0);
        if (tail2 == 0.0) continue;
        const double xnorm = std::sqrt(xnorm2);
        const double ax0 = std::abs(x0);
        const cplx phase = ax0 == 0.0 ? cplx{1.0, 0.0} : x0 / ax0;
        const cplx alpha = -phase * xnorm;
        for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
        v[k + 1] = x0 - alpha;
        const double vnorm2 = detail::abs2(v[k + 1]) + tail2;
        const double tau = 2.0 / vnorm2;

        // p = tau * A22 v
        cplx vp{0.0, 0.0};
        for (std::size_t i = k + 1; i < n; ++i) {
            auto arow = a.row(i);
            double re = 0.0, im = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) {
                const cplx t = cmul(arow[j], v[j]);
                re += t.real();
                im += t.imag();
            }
            p[i] = {tau * re, tau * im};
            vp += cmulc(v[i], p[i]);
        }
        // w = p - (tau/2)(v* p) v, stored in p
        const cplx half = 0.5 * tau * vp;
        for (std::size_t i = k + 1; i < n; ++i) p[i] -= cmul(half, v[i]);
        // A22 <- A22 - v w* - w v*
        for (std::size_t i = k + 1; i < n; ++i) {
            auto arow = a.row(i);
            const cplx vi = v[i], wi = p[i];
            for (std::size_t j = k + 1; j < n; ++j) {
                arow[j] -= cmul(vi, std::conj(p[j])) + cmul(wi, std::conj(v[j]));
            }
        }
        a(k + 1, k) = alpha;
        a(k, k + 1) = std::conj(alpha);
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
            a(k, i) = 0.0;
        }
    }
    std::vector<double> d(n), e(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i).real();
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = std::abs(a(i + 1, i));
    return tridiagonal_eigenvalues(std::move(d), std::move(e));
}

inline std::vector<double> symmetric_eigenvalues(const Matrix& a) { return hermitian_eigenvalues(to_complex(a)); }

// ---------------------------------------------------------------------------
// Singular values

namespace detail {
inline SingularSpectrum from_gram_eigenvalues(const std::vector<double>& ev) {
    SingularSpectrum s;
    s.values.reserve(ev.size());
    for (auto it = ev.rbegin(); it != ev.rend(); ++it) s.values.push_back(std::sqrt(std::max(*it, 0.0)));
    return s;
}
} // namespace detail

/// Singular values of a complex k x n matrix (min(k, n) of them) via the smaller Gram matrix.
inline SingularSpectrum singular_values(const CMatrix& m) {
    const std::size_t k = m.rows(), n = m.cols();
    const bool rows_gram = k <= n;
    const std::size_t g = rows_gram ? k : n;
    CMatrix gram(g, g);
    if (rows_gram) {
        // (M M*)_ij = sum_l m_il conj(m_jl)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double re = 0.0, im = 0.0;
                auto ri = m.row(i);
                auto rj = m.row(j);
                for (std::size_t l = 0; l < n; ++l) {
                    const cplx t = detail::cmulc(rj[l], ri[l]);
                    re += t.real();
                    im += t.imag();
                }
                gram(i, j) = {re, im};
            }
    } else {
        // (M* M)_ij = sum_l conj(m_li) m_lj, accumulated row by row
        for (std::size_t l = 0; l < k; ++l) {
            auto r = m.row(l);
            for (std::size_t i = 0; i < n; ++i) {
                const cplx ci = std::conj(r[i]);
                auto grow = gram.row(i);
                for (std::size_t j = 0; j <= i; ++j) grow[j] += detail::cmul(ci, r[j]);
            }
        }
    }
    return detail::from_gram_eigenvalues(hermitian_eigenvalues(std::move(gram)));
}

/// Singular values of A - z Id for real square A, using
/// (A - z)^*(A - z) = A^T A - z A^T - conj(z) A + |z|^2 Id.
inline SingularSpectrum singular_values_shifted(const Matrix& a, cplx z) {
    if (!a.square()) throw DomainError("singular_values_shifted: matrix is not square");
    if (!all_finite(a)) throw DomainError("singular_values_shifted: non-finite entry");
    const std::size_t n = a.rows();
    Matrix ata(n, n);
    for (std::size_t l = 0; l < n; ++l) {
        auto r = a.row(l);
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = r[i];
            if (ri == 0.0) continue;
            auto grow = ata.row(i);
            for (std::size_t j = 0; j <= i; ++j) grow[j] += ri * r[j];
        }
    }
    const double z2 = std::norm(z);
    CMatrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            // -z A_ji - conj(z) A_ij
            const double aji = a(j, i), aij = a(i, j);
            const double re = ata(i, j) - z.real() * (aji + aij);
            const double im = -z.imag() * aji + z.imag() * aij;
            gram(i, j) = {re + (i == j ? z2 : 0.0), im};
        }
    return detail::from_gram_eigenvalues(hermitian_eigenvalues(std::move(gram)));
}

/// The 2n x 2n Hermitian matrix [[0, A - z], [(A - z)^*, 0]].
inline CMatrix hermitize(const Matrix& a, cplx z) {
    if (!a.square()) throw DomainError("hermitize: matrix is not square");
    if (!all_finite(a)) throw DomainError("hermitize: non-finite entry");
    const std::size_t n = a.rows();
    const CMatrix m = shifted(a, z);
    CMatrix b(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            b(i, n + j) = m(i, j);
            b(n + j, i) = std::conj(m(i, j));
        }
    return b;
}

// ---------------------------------------------------------------------------
// Subspaces and transforms

/// Euclidean distance from v to the span of the rows (k < n), by modified
/// Gram-Schmidt with one full re-orthogonalization pass.
inline double distance_to_row_span(const CMatrix& rows, std::span<const cplx> v) {
    const std::size_t k = rows.rows(), n = rows.cols();
    if (v.size() != n) throw DomainError("distance_to_row_span: dimension mismatch");
    if (k >= n) throw DomainError("distance_to_row_span: need fewer rows than columns");
    auto project_out = [](std::vector<cplx>& r, const std::vector<std::vector<cplx>>& basis) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) {
                cplx dot{0.0, 0.0};
                for (std::size_t j = 0; j < r.size(); ++j) dot += detail::cmulc(q[j], r[j]);
                for (std::size_t j = 0; j < r.size(); ++j) r[j] -= detail::cmul(dot, q[j]);
            }
    };
    auto norm = [](const std::vector<cplx>& r) {
        double s = 0.0;
        for (const cplx& c : r) s += detail::abs2(c);
        return std::sqrt(s);
    };
    std::vector<std::vector<cplx>> basis;
    basis.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<cplx> r(rows.row(i).begin(), rows.row(i).end());
        const double before = norm(r);
        if (before == 0.0) continue;
        project_out(r, basis);
        const double after = norm(r);
        if (after <= 1e-12 * before) continue;  // dependent row
        for (cplx& c : r) c /= after;
        basis.push_back(std::move(r));
    }
    std::vector<cplx> r(v.begin(), v.end());
    project_out(r, basis);
    return norm(r);
}

/// (1/n) sum_k 1/(lambda_k - xi), for Im(xi) > 0.
inline cplx stieltjes_transform(std::span<const double> spectrum, cplx xi) {
    if (!(xi.imag() > 0.0)) throw DomainError("stieltjes_transform: Im(xi) must be positive");
    if (spectrum.empty()) throw DomainError("stieltjes_transform: empty spectrum");
    cplx sum{0.0, 0.0};
    for (double lambda : spectrum) sum += 1.0 / (lambda - xi);
    return sum / static_cast<double>(spectrum.size());
}

} // namespace exchmat

#endif
