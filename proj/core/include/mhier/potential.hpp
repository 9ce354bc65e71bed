#pragma once

// One-dimensional polynomial potentials V(q) = sum_k c_k q^k with exact
// derivative evaluation. The quartic anharmonic case c_4 = lambda is the
// workhorse; linear and harmonic specializations get factory helpers.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace mhier {

struct PolynomialPotential {
    // coeffs[k] multiplies q^k; trailing zeros trimmed on construction
    std::vector<double> coeffs;

    PolynomialPotential() = default;
    explicit PolynomialPotential(std::vector<double> c) : coeffs(std::move(c)) {
        while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
    }

    static PolynomialPotential linear(double beta) { return PolynomialPotential({0.0, beta}); }
    static PolynomialPotential harmonic(double omega_sq) {
        return PolynomialPotential({0.0, 0.0, 0.5 * omega_sq});
    }
    static PolynomialPotential quartic(double lambda) {
        return PolynomialPotential({0.0, 0.0, 0.0, 0.0, lambda});
    }
    static PolynomialPotential free_particle() { return PolynomialPotential{}; }

    int degree() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.size()) - 1; }

    // n-th derivative evaluated at q (n = 0 gives V itself)
    double derivative(int n, double q) const {
        if (coeffs.empty()) return 0.0;
        double acc = 0.0;
        for (int k = degree(); k >= n; --k) {
            double fall = 1.0;
            for (int j = 0; j < n; ++j) fall *= static_cast<double>(k - j);
            acc = acc * q + coeffs[static_cast<size_t>(k)] * fall;
        }
        // Horner above accumulates in powers of q for the shifted series:
        // sum_k c_k * k!/(k-n)! * q^(k-n)
        return acc;
    }

    double operator()(double q) const { return derivative(0, q); }

    bool is_harmonic() const { return degree() <= 2; }  // V''' == 0: no moment back-reaction
};

}  // namespace mhier
