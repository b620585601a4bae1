#ifndef EXCHMAT_MATRIX_HPP
#define EXCHMAT_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "exchmat/error.hpp"

namespace exchmat {

using cplx = std::complex<double>;

/// Row-major dense matrix with value semantics.
template <typename T>
class DenseMatrix {
public:
    using value_type = T;

    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_)
            throw ValidationError("DenseMatrix: expected " + std::to_string(rows_ * cols_) + " values, got " +
                                  std::to_string(data_.size()));
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool square() const noexcept { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = DenseMatrix<double>;
using CMatrix = DenseMatrix<cplx>;

namespace detail {
inline double conj_if(double x) { return x; }
inline cplx conj_if(cplx x) { return std::conj(x); }
inline double abs2(double x) { return x * x; }
inline double abs2(cplx x) { return x.real() * x.real() + x.imag() * x.imag(); }
} // namespace detail

template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& a) {
    DenseMatrix<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// Conjugate transpose (plain transpose for real matrices).
template <typename T>
DenseMatrix<T> adjoint(const DenseMatrix<T>& a) {
    DenseMatrix<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = detail::conj_if(a(i, j));
    return t;
}

template <typename T>
DenseMatrix<T> multiply(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
    if (a.cols() != b.rows()) throw DomainError("multiply: inner dimensions differ");
    DenseMatrix<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            if (aik == T{}) continue;
            auto crow = c.row(i);
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    return c;
}

template <typename T>
T trace(const DenseMatrix<T>& a) {
    T s{};
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
    return s;
}

/// Squared Hilbert-Schmidt (Frobenius) norm.
template <typename T>
double hs_norm_sq(const DenseMatrix<T>& a) {
    double s = 0.0;
    for (const T& v : a.values()) s += detail::abs2(v);
    return s;
}

inline CMatrix to_complex(const Matrix& a) {
    CMatrix c(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) c.values()[k] = a.values()[k];
    return c;
}

/// A - z Id for a real square A.
inline CMatrix shifted(const Matrix& a, cplx z) {
    if (!a.square()) throw DomainError("shifted: matrix is not square");
    CMatrix m = to_complex(a);
    for (std::size_t i = 0; i < a.rows(); ++i) m(i, i) -= z;
    return m;
}

inline Matrix scaled(Matrix a, double s) {
    for (double& v : a.values()) v *= s;
    return a;
}

template <typename T>
bool all_finite(const DenseMatrix<T>& a) {
    for (const T& v : a.values()) {
        if constexpr (std::is_same_v<T, double>) {
            if (!std::isfinite(v)) return false;
        } else {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
    }
    return true;
}

} // namespace exchmat

#endif
