#ifndef EXCHMAT_SEED_IO_HPP
#define EXCHMAT_SEED_IO_HPP

// Plain-text seed files:
//   line 1: n
//   lines 2..n+1: n whitespace-separated decimal values each.
// Blank lines and lines starting with '#' are ignored.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "exchmat/ensemble.hpp"
#include "exchmat/error.hpp"

namespace exchmat {

namespace detail {

inline bool next_content_line(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        return true;
    }
    return false;
}

inline double parse_double(const std::string& tok, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ValidationError(where + ": cannot parse '" + tok + "' as a number");
    return v;
}

} // namespace detail

inline SeedMatrix read_seed(std::istream& in, std::string label = "file") {
    std::string line;
    std::size_t lineno = 0;
    if (!detail::next_content_line(in, line, lineno)) throw ValidationError("seed file: missing dimension line");
    std::size_t n = 0;
    {
        std::istringstream ls(line);
        std::string tok, extra;
        ls >> tok;
        if (ls >> extra) throw ValidationError("seed file line " + std::to_string(lineno) + ": expected only n");
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), n);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || n < 2)
            throw ValidationError("seed file line " + std::to_string(lineno) + ": invalid dimension '" + tok + "'");
    }
    std::vector<double> values;
    values.reserve(n * n);
    for (std::size_t row = 1; row <= n; ++row) {
        if (!detail::next_content_line(in, line, lineno))
            throw ValidationError("seed file: row " + std::to_string(row) + " missing (expected " +
                                  std::to_string(n) + " rows)");
        std::istringstream ls(line);
        std::string tok;
        std::size_t col = 0;
        while (ls >> tok) {
            ++col;
            const std::string where = "seed file row " + std::to_string(row) + ", column " + std::to_string(col);
            if (col > n) throw ValidationError(where + ": too many values (expected " + std::to_string(n) + ")");
            const double v = detail::parse_double(tok, where);
            if (!std::isfinite(v)) throw ValidationError(where + ": non-finite value");
            values.push_back(v);
        }
        if (col < n)
            throw ValidationError("seed file row " + std::to_string(row) + ": expected " + std::to_string(n) +
                                  " values, found " + std::to_string(col));
    }
    if (detail::next_content_line(in, line, lineno))
        throw ValidationError("seed file line " + std::to_string(lineno) + ": trailing content after " +
                              std::to_string(n) + " rows");
    return SeedMatrix(Matrix(n, n, std::move(values)), std::move(label));
}

inline SeedMatrix read_seed_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("seed file: cannot open '" + path + "'");
    return read_seed(in, path);
}

/// Writes with 17 significant digits so that re-reading is exact.
inline void write_seed(std::ostream& out, const SeedMatrix& seed) {
    const std::size_t n = seed.n();
    out << n << '\n';
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", seed.entries()(i, j));
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
}

} // namespace exchmat

#endif
