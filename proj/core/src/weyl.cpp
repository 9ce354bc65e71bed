#include "mhier/weyl.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mhier {
namespace weyl {

WeylPolynomial WeylPolynomial::monomial(int a, int b, CRat c, SymbolPowers s) {
    WeylPolynomial P;
    P.add(a, b, s, c);
    return P;
}

void WeylPolynomial::add(int a, int b, const SymbolPowers& s, const CRat& c) {
    if (c.is_zero()) return;
    auto& poly = terms[{a, b}];
    auto it = poly.find(s);
    if (it == poly.end()) {
        poly.emplace(s, c);
    } else {
        it->second = it->second + c;
        if (it->second.is_zero()) poly.erase(it);
    }
    if (poly.empty()) terms.erase({a, b});
}

void WeylPolynomial::prune() {
    for (auto it = terms.begin(); it != terms.end();) {
        for (auto jt = it->second.begin(); jt != it->second.end();)
            jt = jt->second.is_zero() ? it->second.erase(jt) : std::next(jt);
        it = it->second.empty() ? terms.erase(it) : std::next(it);
    }
}

WeylPolynomial WeylPolynomial::operator+(const WeylPolynomial& o) const {
    WeylPolynomial r = *this;
    for (const auto& [mono, poly] : o.terms)
        for (const auto& [s, c] : poly) r.add(mono.first, mono.second, s, c);
    return r;
}

WeylPolynomial WeylPolynomial::operator-(const WeylPolynomial& o) const {
    WeylPolynomial r = *this;
    for (const auto& [mono, poly] : o.terms)
        for (const auto& [s, c] : poly)
            r.add(mono.first, mono.second, s, {-c.re, -c.im});
    return r;
}

WeylPolynomial WeylPolynomial::scaled(const CRat& c) const {
    WeylPolynomial r;
    for (const auto& [mono, poly] : terms)
        for (const auto& [s, k] : poly) r.add(mono.first, mono.second, s, k * c);
    return r;
}

bool WeylPolynomial::is_hermitian() const {
    for (const auto& [mono, poly] : terms)
        for (const auto& [s, c] : poly)
            if (c.im != 0) return false;
    return true;
}

int WeylPolynomial::degree() const {
    int d = 0;
    for (const auto& [mono, poly] : terms) d = std::max(d, mono.first + mono.second);
    return d;
}

namespace {

// i^k as a complex rational rotation of c
CRat i_pow_times(int k, const CRat& c) {
    switch (((k % 4) + 4) % 4) {
        case 0: return c;
        case 1: return c.times_i();
        case 2: return {-c.re, -c.im};
        default: return c.times_minus_i();
    }
}

}  // namespace

WeylPolynomial star_product(const WeylPolynomial& P, const WeylPolynomial& Q) {
    WeylPolynomial R;
    for (const auto& [m1, poly1] : P.terms) {
        const int a1 = m1.first, b1 = m1.second;
        for (const auto& [m2, poly2] : Q.terms) {
            const int a2 = m2.first, b2 = m2.second;
            const int kmax = std::min(a1 + b1, a2 + b2);
            for (int k = 0; k <= kmax; ++k) {
                for (int j = 0; j <= k; ++j) {
                    // (d/dq)^(k-j) (d/dp)^j on P-monomial, transposed on Q
                    if (j > a1 || k - j > b1 || k - j > a2 || j > b2) continue;
                    Rational mag(binomial(k, j) * falling(a1, j) * falling(b1, k - j) *
                                     falling(a2, k - j) * falling(b2, j),
                                 factorial(k) * (BigInt(1) << k));
                    if ((j & 1) != 0) mag = -mag;
                    const CRat base = i_pow_times(k, CRat{mag, Rational(0)});
                    const int na = a1 + a2 - k, nb = b1 + b2 - k;
                    for (const auto& [s1, c1] : poly1) {
                        for (const auto& [s2, c2] : poly2) {
                            SymbolPowers s{s1.hbar + s2.hbar + k, s1.q + s2.q, s1.p + s2.p};
                            R.add(na, nb, s, base * c1 * c2);
                        }
                    }
                }
            }
        }
    }
    return R;
}

WeylPolynomial moyal_bracket(const WeylPolynomial& P, const WeylPolynomial& Q) {
    WeylPolynomial comm = star_product(P, Q) - star_product(Q, P);
    // divide by i*hbar: every surviving term carries hbar^k with odd k >= 1
    WeylPolynomial R;
    for (const auto& [mono, poly] : comm.terms) {
        for (const auto& [s, c] : poly) {
            if (s.hbar < 1)
                throw std::logic_error("Moyal commutator produced an hbar-free term");
            R.add(mono.first, mono.second, {s.hbar - 1, s.q, s.p}, c.times_minus_i());
        }
    }
    return R;
}

WeylPolynomial poisson_bracket(const WeylPolynomial& P, const WeylPolynomial& Q) {
    WeylPolynomial R;
    for (const auto& [m1, poly1] : P.terms) {
        const int a1 = m1.first, b1 = m1.second;
        for (const auto& [m2, poly2] : Q.terms) {
            const int a2 = m2.first, b2 = m2.second;
            // dP/dq dQ/dp - dP/dp dQ/dq in the deviation variables
            const Rational f1 = Rational(BigInt(b1) * a2), f2 = Rational(BigInt(a1) * b2);
            for (const auto& [s1, c1] : poly1) {
                for (const auto& [s2, c2] : poly2) {
                    SymbolPowers s{s1.hbar + s2.hbar, s1.q + s2.q, s1.p + s2.p};
                    if (f1 != 0 && b1 >= 1 && a2 >= 1)
                        R.add(a1 + a2 - 1, b1 + b2 - 1, s, (c1 * c2) * CRat{f1, Rational(0)});
                    if (f2 != 0 && a1 >= 1 && b2 >= 1)
                        R.add(a1 + a2 - 1, b1 + b2 - 1, s, (c1 * c2) * CRat{-f2, Rational(0)});
                }
            }
        }
    }
    return R;
}

WeylPolynomial bracket(const WeylPolynomial& P, const WeylPolynomial& Q, Flavor flavor) {
    return flavor == Flavor::Quantum ? moyal_bracket(P, Q) : poisson_bracket(P, Q);
}

WeylPolynomial operator_word(const std::string& letters) {
    WeylPolynomial acc = WeylPolynomial::monomial(0, 0);
    for (char ch : letters) {
        if (ch == 'q')
            acc = star_product(acc, WeylPolynomial::monomial(0, 1));
        else if (ch == 'p')
            acc = star_product(acc, WeylPolynomial::monomial(1, 0));
        else
            throw std::invalid_argument("operator word letters must be 'q' or 'p'");
    }
    return acc;
}

WeylPolynomial operator_word_adjoint(const std::string& letters) {
    return operator_word(std::string(letters.rbegin(), letters.rend()));
}

std::complex<double> expectation(const WeylPolynomial& P, const MomentSet& state) {
    std::complex<double> acc{0.0, 0.0};
    for (const auto& [mono, poly] : P.terms) {
        const int ord = mono.first + mono.second;
        if (ord == 1) continue;
        double g = 1.0;
        if (ord >= 2) g = state.get(mono.first, mono.second);  // throws past cutoff
        for (const auto& [s, c] : poly) {
            const double scale = std::pow(state.hbar, s.hbar) * std::pow(state.q, s.q) *
                                 std::pow(state.p, s.p);
            acc += std::complex<double>(to_double(c.re), to_double(c.im)) * scale * g;
        }
    }
    return acc;
}

CompiledExpectation compile_expectation(const WeylPolynomial& P, int n_max, double hbar) {
    CompiledExpectation ce;
    for (const auto& [mono, poly] : P.terms) {
        const int ord = mono.first + mono.second;
        if (ord == 1) continue;
        if (ord > n_max) throw std::out_of_range("expectation degree beyond cutoff");
        std::complex<double> c{0.0, 0.0};
        for (const auto& [s, k] : poly) {
            if (s.q != 0 || s.p != 0)
                throw std::invalid_argument("compiled expectation requires centered terms");
            c += std::complex<double>(to_double(k.re), to_double(k.im)) *
                 std::pow(hbar, s.hbar);
        }
        if (ord == 0) {
            ce.constant += c;
        } else {
            ce.index.push_back(MomentLayout::index(mono.first, mono.second));
            ce.coeff.push_back(c);
        }
    }
    return ce;
}

// --- equation-of-motion derivation ------------------------------------------

namespace {

// Hamiltonian symbol expanded about the centroid:
//   (dp + p)^2/2 + sum_k c_k (q + dq)^k
// constant-in-deviation pieces omitted (they commute away in brackets)
WeylPolynomial hamiltonian_symbol(const PolynomialPotential& V) {
    WeylPolynomial H;
    H.add(2, 0, {}, {Rational(1, 2), Rational(0)});
    H.add(1, 0, {0, 0, 1}, {Rational(1), Rational(0)});
    const int deg = V.degree();
    for (int n = 1; n <= deg; ++n) {
        // coefficient of dq^n: sum_k c_k C(k,n) q^(k-n)
        for (int k = n; k <= deg; ++k) {
            const Rational ck = rational_from_double(V.coeffs[static_cast<size_t>(k)]);
            if (ck == 0) continue;
            const Rational c = ck * Rational(binomial(k, n));
            H.add(0, n, {0, k - n, 0}, {c, Rational(0)});
        }
    }
    return H;
}

struct CanonKey {
    int q_pow, hbar_pow, p_pow;
    std::vector<MomentKey> factors;
    auto operator<=>(const CanonKey&) const = default;
};

using TermAcc = std::map<CanonKey, CRat>;

void accumulate(TermAcc& acc, const CanonKey& key, const CRat& c) {
    auto it = acc.find(key);
    if (it == acc.end())
        acc.emplace(key, c);
    else {
        it->second = it->second + c;
        if (it->second.is_zero()) acc.erase(it);
    }
}

// expectation-reduce a Weyl polynomial: monomial -> one moment factor
// (order-1 monomials vanish, order-0 contribute no factor)
void reduce_into(TermAcc& acc, const WeylPolynomial& P,
                 const std::vector<MomentKey>& extra_factors) {
    for (const auto& [mono, poly] : P.terms) {
        const int ord = mono.first + mono.second;
        if (ord == 1) continue;
        std::vector<MomentKey> factors = extra_factors;
        if (ord >= 2) factors.push_back({mono.first, mono.second});
        std::sort(factors.begin(), factors.end());
        for (const auto& [s, c] : poly)
            accumulate(acc, {s.q, s.hbar, s.p, factors}, c);
    }
}

std::vector<EOMTerm> finalize(TermAcc& acc, int n_max) {
    std::vector<EOMTerm> out;
    for (const auto& [key, c] : acc) {
        if (c.im != 0)
            throw std::logic_error("moment equation has an imaginary residue");
        if (key.p_pow != 0)
            throw std::logic_error("centroid-momentum symbol failed to cancel");
        const bool truncated =
            std::any_of(key.factors.begin(), key.factors.end(),
                        [n_max](const MomentKey& k) { return k.order() > n_max; });
        if (truncated) continue;
        EOMTerm t;
        t.coeff = c.re;
        t.q_pow = key.q_pow;
        t.hbar_pow = key.hbar_pow;
        t.factors = key.factors;
        out.push_back(std::move(t));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<EOMTerm> derive_centroid_force(const PolynomialPotential& V, Flavor flavor,
                                           const TruncationPolicy& policy) {
    const WeylPolynomial H = hamiltonian_symbol(V);
    TermAcc acc;
    reduce_into(acc, bracket(WeylPolynomial::monomial(1, 0), H, flavor), {});
    return finalize(acc, policy.n_max);
}

MomentEOM derive_moment_eom(int a, int b, const PolynomialPotential& V, Flavor flavor,
                            const TruncationPolicy& policy) {
    if (a < 0 || b < 0 || a + b < 2 || a + b > policy.n_max)
        throw std::invalid_argument("target moment must satisfy 2 <= a+b <= n_max");
    const WeylPolynomial H = hamiltonian_symbol(V);
    TermAcc acc;

    // commutator part
    reduce_into(acc, bracket(WeylPolynomial::monomial(a, b), H, flavor), {});

    // centered-moment shifts: d/dt of the deviation variables themselves.
    //   d(dp^a dq^b)/dt |_shift = -a pdot W(a-1,b) - b qdot W(a,b-1), qdot = p
    if (a > 0 && a - 1 + b != 1) {
        // pdot expansion: expectation-reduced force terms (each <= 1 factor)
        TermAcc force;
        reduce_into(force, bracket(WeylPolynomial::monomial(1, 0), H, flavor), {});
        for (const auto& [fkey, fc] : force) {
            std::vector<MomentKey> factors = fkey.factors;
            if (a - 1 + b >= 2) {
                factors.push_back({a - 1, b});
                std::sort(factors.begin(), factors.end());
            }
            accumulate(acc, {fkey.q_pow, fkey.hbar_pow, fkey.p_pow, factors},
                       fc * CRat{Rational(-a), Rational(0)});
        }
    }
    if (b > 0 && a + b - 1 != 1) {
        std::vector<MomentKey> factors;
        if (a + b - 1 >= 2) factors.push_back({a, b - 1});
        accumulate(acc, {0, 0, 1, factors}, {Rational(-b), Rational(0)});
    }

    MomentEOM eom;
    eom.a = a;
    eom.b = b;
    eom.terms = finalize(acc, policy.n_max);
    return eom;
}

std::string hierarchy_to_json(const std::vector<MomentEOM>& system) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& eq : system) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : eq.terms) {
            nlohmann::json factors = nlohmann::json::array();
            for (const auto& f : t.factors) factors.push_back({f.a, f.b});
            std::ostringstream coeff;
            coeff << t.coeff;
            terms.push_back({{"coeff", coeff.str()},
                             {"q_power", t.q_pow},
                             {"hbar_power", t.hbar_pow},
                             {"factors", std::move(factors)}});
        }
        root.push_back({{"target", {eq.a, eq.b}}, {"terms", std::move(terms)}});
    }
    return root.dump(2);
}

}  // namespace weyl
}  // namespace mhier
