#pragma once

// Exact symbolic algebra of Weyl-ordered polynomials in the deviation
// variables (dp, dq). A monomial key (a,b) denotes the totally symmetrized
// product of a factors dp and b factors dq; its phase-space Weyl symbol is
// the plain monomial dp^a dq^b, which is what makes the Groenewold product
// finite and exact on polynomials.
//
// Coefficients are complex rationals times monomials in the symbols
// (hbar, q, p), so derivations are exact; floats appear only when a
// right-hand side is compiled for numerics.

#include <complex>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mhier/moments.hpp"
#include "mhier/potential.hpp"
#include "mhier/rational.hpp"

namespace mhier {
namespace weyl {

struct CRat {
    Rational re, im;
    bool is_zero() const { return re == 0 && im == 0; }
    CRat operator+(const CRat& o) const { return {re + o.re, im + o.im}; }
    CRat operator-(const CRat& o) const { return {re - o.re, im - o.im}; }
    CRat operator*(const CRat& o) const {
        return {re * o.re - im * o.im, re * o.im + im * o.re};
    }
    CRat times_i() const { return {-im, re}; }
    CRat times_minus_i() const { return {im, -re}; }
    CRat conj() const { return {re, -im}; }
};

// powers of the commuting symbols carried by a coefficient
struct SymbolPowers {
    int hbar = 0, q = 0, p = 0;
    auto operator<=>(const SymbolPowers&) const = default;
};

using CoeffPoly = std::map<SymbolPowers, CRat>;

struct WeylPolynomial {
    // (a, b) -> coefficient polynomial
    std::map<std::pair<int, int>, CoeffPoly> terms;

    static WeylPolynomial monomial(int a, int b, CRat c = {Rational(1), Rational(0)},
                                   SymbolPowers s = {});
    static WeylPolynomial zero() { return {}; }

    void add(int a, int b, const SymbolPowers& s, const CRat& c);
    void prune();
    WeylPolynomial operator+(const WeylPolynomial& o) const;
    WeylPolynomial operator-(const WeylPolynomial& o) const;
    WeylPolynomial scaled(const CRat& c) const;
    bool is_hermitian() const;  // all coefficients real
    int degree() const;
};

// Groenewold star product, exact on polynomials (terminates at the smaller
// total degree); hbar enters symbolically as coefficient powers.
WeylPolynomial star_product(const WeylPolynomial& P, const WeylPolynomial& Q);

// (P*Q - Q*P)/(i hbar): antisymmetric, real-coefficient for Hermitian inputs
WeylPolynomial moyal_bracket(const WeylPolynomial& P, const WeylPolynomial& Q);

// classical bracket dP/dq dQ/dp - dP/dp dQ/dq on commuting symbols
WeylPolynomial poisson_bracket(const WeylPolynomial& P, const WeylPolynomial& Q);

// flavor dispatch: Quantum -> Moyal, Classical -> Poisson
WeylPolynomial bracket(const WeylPolynomial& P, const WeylPolynomial& Q, Flavor flavor);

// Weyl symbol of the Hermitian operator word given by `letters`, each 'q' or
// 'p' (a deviation factor), composed left-to-right with the star product.
WeylPolynomial operator_word(const std::string& letters);
// symbol of the adjoint word (reversed letter order)
WeylPolynomial operator_word_adjoint(const std::string& letters);

// numeric expectation against a state: substitutes hbar/q/p and maps
// monomials to stored moments (order 0 -> 1, order 1 -> 0); throws if the
// polynomial references an order beyond the state's cutoff
std::complex<double> expectation(const WeylPolynomial& P, const MomentSet& state);

// Linear form over the stored-moment vector for fast repeated evaluation at
// fixed hbar. Requires every coefficient to be free of the q and p symbols
// (true for centered constructions such as the inequality suites).
struct CompiledExpectation {
    std::vector<int> index;
    std::vector<std::complex<double>> coeff;
    std::complex<double> constant{0.0, 0.0};

    std::complex<double> eval(const double* moments) const {
        std::complex<double> acc = constant;
        for (size_t i = 0; i < index.size(); ++i)
            acc += coeff[i] * moments[static_cast<size_t>(index[i])];
        return acc;
    }
};
CompiledExpectation compile_expectation(const WeylPolynomial& P, int n_max, double hbar);

// --- symbolic equation of motion -------------------------------------------

// dG^{a,b}/dt as an exact term list: coeff * q^q_pow * hbar^hbar_pow *
// (product of <= 2 stored-moment factors). Obtained by bracketing the Weyl
// monomial with the centroid-expanded Hamiltonian symbol and adding the
// centered-moment chain-rule shifts; every occurrence of the symbol p must
// cancel in the result, which is asserted.
struct EOMTerm {
    Rational coeff;
    int q_pow = 0;
    int hbar_pow = 0;
    std::vector<MomentKey> factors;  // size 0..2, canonically sorted

    bool operator<(const EOMTerm& o) const {
        auto proj = [](const EOMTerm& t) {
            return std::tuple(t.factors.size(),
                              t.factors.size() > 0 ? t.factors[0] : MomentKey{},
                              t.factors.size() > 1 ? t.factors[1] : MomentKey{}, t.q_pow,
                              t.hbar_pow);
        };
        return proj(*this) < proj(o);
    }
};

struct MomentEOM {
    int a = 0, b = 0;
    std::vector<EOMTerm> terms;  // canonically sorted, combined, nonzero
};

MomentEOM derive_moment_eom(int a, int b, const PolynomialPotential& V, Flavor flavor,
                            const TruncationPolicy& policy);

// dp/dt term list derived the same way (dq/dt is exactly p): constant part
// -V'(q) plus one factor G^{0,m} per backreaction term
std::vector<EOMTerm> derive_centroid_force(const PolynomialPotential& V, Flavor flavor,
                                           const TruncationPolicy& policy);

// JSON dump of a derived hierarchy: one entry per target moment, the
// interchange format for compiled right-hand sides
std::string hierarchy_to_json(const std::vector<MomentEOM>& system);

}  // namespace weyl
}  // namespace mhier
