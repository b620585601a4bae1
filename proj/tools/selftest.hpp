#ifndef EXCHMAT_TOOLS_SELFTEST_HPP
#define EXCHMAT_TOOLS_SELFTEST_HPP

// Quick oracle checks bundled into the binary: `exchmat selftest`.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "exchmat/exchmat.hpp"

namespace exchmat::selftest {

struct Check {
    std::string name;
    std::function<bool(std::string&)> run;  // fills a short detail string
};

inline std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

inline std::vector<Check> checks() {
    std::vector<Check> out;

    out.push_back({"rng: frozen stream (42, 0)", [](std::string& d) {
                       RngStream r(42, 0);
                       const auto v = r();
                       d = "first word " + std::to_string(v);
                       return v == 0xd7492b557c449d0bULL;
                   }});

    out.push_back({"ensemble: exact moments, n = 2", [](std::string& d) {
                       const auto m = exact_pair_moments(rademacher_seed(2));
                       const double err = std::max({std::abs(m.mean), std::abs(m.second_moment - 1.0),
                                                    std::abs(m.cross_covariance + 1.0 / 3.0)});
                       d = "max error " + fmt(err);
                       return err < 1e-12;
                   }});

    out.push_back({"combclt: variance formula vs enumeration, n = 6", [](std::string& d) {
                       RngStream rng(1, 0);
                       const CombCLTInstance inst(gaussian_coefficients(6, rng), random_scores(6, rng, false));
                       const double var = law_moments(exact_distribution(inst)).variance;
                       const double rel = std::abs(var - inst.sigma2()) / inst.sigma2();
                       d = "relative error " + fmt(rel);
                       return rel < 1e-10;
                   }});

    out.push_back({"linalg: trace of A^2 vs eigenvalues, 8 x 8", [](std::string& d) {
                       RngStream rng(2, 0);
                       Matrix a(8, 8);
                       for (double& v : a.values()) v = standard_normal(rng);
                       cplx s2 = 0.0;
                       for (cplx l : eigenvalues(a).values) s2 += l * l;
                       const double t2 = trace(multiply(a, a));
                       const double rel = std::abs(s2 - t2) / std::max(1.0, std::abs(t2));
                       d = "relative error " + fmt(rel);
                       return rel < 1e-8;
                   }});

    out.push_back({"linalg: Hermitization vs Gram singular values", [](std::string& d) {
                       RngStream rng(3, 0);
                       Matrix a(6, 6);
                       for (double& v : a.values()) v = standard_normal(rng);
                       const cplx z{0.3, -0.2};
                       const auto sv = singular_values_shifted(a, z);
                       auto h = hermitian_eigenvalues(hermitize(a, z));
                       double err = 0.0;
                       for (std::size_t i = 0; i < 6; ++i) err = std::max(err, std::abs(h[11 - i] - sv.values[i]));
                       d = "max error " + fmt(err);
                       return err < 1e-8;
                   }});

    out.push_back({"ssv: negative second moment identity, 5 x 8", [](std::string& d) {
                       RngStream rng(4, 0);
                       CMatrix b(5, 8);
                       for (cplx& v : b.values()) v = {standard_normal(rng), standard_normal(rng)};
                       const double disc = neg_second_moment_check(b).discrepancy;
                       d = "discrepancy " + fmt(disc);
                       return disc < 1e-8;
                   }});

    out.push_back({"spectral: log potential of 2 Id at 0", [](std::string& d) {
                       const double u = log_potential_empirical(scaled(Matrix::identity(3), 2.0), 0.0);
                       d = "U = " + fmt(u);
                       return std::abs(u + std::log(2.0)) < 1e-14;
                   }});
    return out;
}

/// Prints one line per check; returns the number of failures.
inline int run(std::FILE* out) {
    int failed = 0;
    for (const auto& c : checks()) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("threw: ") + e.what();
        }
        failed += !ok;
        std::fprintf(out, "%s  %s (%s)\n", ok ? "PASS" : "FAIL", c.name.c_str(), detail.c_str());
    }
    return failed;
}

} // namespace exchmat::selftest

#endif
