#ifndef EXCHMAT_ERROR_HPP
#define EXCHMAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace exchmat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (empty input, Im(xi) <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Input data violates a structural constraint (seed sums, file format, config keys).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Input is degenerate for the requested normalization or statistic (zero variance, rank deficiency).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// An iterative kernel did not converge.
class NumericFailure : public Error {
public:
    using Error::Error;
};

/// Exhaustive enumeration was requested on a size where it is infeasible.
class EnumerationLimit : public Error {
public:
    using Error::Error;
};

} // namespace exchmat

#endif
