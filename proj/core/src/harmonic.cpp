#include "mhier/harmonic.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mhier/rational.hpp"

namespace mhier {

HarmonicSpec HarmonicSpec::from_potential(const PolynomialPotential& V) {
    if (V.degree() > 2)
        throw std::invalid_argument("potential has anharmonic terms (degree > 2)");
    HarmonicSpec s;
    s.beta = V.derivative(1, 0.0);
    s.omega_sq = V.derivative(2, 0.0);
    return s;
}

MomentSet linear_evolution(const MomentSet& initial, double t, double beta) {
    MomentSet out = initial;
    out.q = initial.q + initial.p * t - 0.5 * beta * t * t;
    out.p = initial.p - beta * t;
    for (int idx = 0; idx < initial.size(); ++idx) {
        const MomentKey key = MomentLayout::key_at(idx);
        const int a = key.a, b = key.b;
        // binomial transport along straight characteristics: each dq picks up
        // a t*dp; moments G^{a+b-n,n} of the same total order mix in
        double acc = 0.0;
        double tpow = 1.0;
        for (int n = b; n >= 0; --n) {
            acc += binomial(b, n).convert_to<double>() * tpow * initial.get(a + b - n, n);
            tpow *= t;
        }
        out.values[static_cast<size_t>(idx)] = acc;
    }
    return out;
}

MomentSet linear_evolution(const MomentSet& initial, double t, const HarmonicSpec& spec) {
    if (spec.omega_sq != 0.0)
        throw std::invalid_argument("closed-form linear evolution needs V'' = 0");
    return linear_evolution(initial, t, spec.beta);
}

namespace {

Rational rat_pow(const Rational& x, int n) {
    Rational acc(1);
    for (int i = 0; i < n; ++i) acc *= x;
    return acc;
}

}  // namespace

MomentSet harmonic_stationary_candidate(double E, double omega_sq, double hbar, int n_max) {
    if (omega_sq == 0.0) throw std::invalid_argument("stationary chain needs omega_sq != 0");
    if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");

    const Rational Er = rational_from_double(E);
    const Rational w2 = rational_from_double(omega_sq);
    const Rational hb2 = rational_from_double(hbar) * rational_from_double(hbar);

    // position chain, exact: tower[k] = G^{0,k}, odd entries zero
    std::vector<Rational> tower(static_cast<size_t>(n_max) + 1, Rational(0));
    tower[0] = Rational(1);
    for (int k = 0; k + 2 <= n_max; k += 2) {
        Rational z = Rational(2 * (k + 1)) * Er * tower[static_cast<size_t>(k)];
        if (k >= 2)
            z += hb2 * Rational(BigInt((k + 1) * k * (k - 1)), BigInt(4)) *
                 tower[static_cast<size_t>(k - 2)];
        tower[static_cast<size_t>(k + 2)] = z / (w2 * Rational(k + 2));
    }

    MomentSet out(hbar > 0.0 ? Flavor::Quantum : Flavor::Classical, hbar, n_max, 0.0, 0.0);
    for (int a2 = 0; 2 * a2 <= n_max; ++a2) {
        for (int b2 = 0; 2 * (a2 + b2) <= n_max; ++b2) {
            if (a2 + b2 == 0) continue;
            const int s = a2 + b2;
            const Rational mix = Rational(factorial(2 * a2) * factorial(2 * b2), factorial(2 * s)) *
                                 Rational(factorial(s), factorial(a2) * factorial(b2)) *
                                 rat_pow(w2, a2);
            out.set(2 * a2, 2 * b2, to_double(mix * tower[static_cast<size_t>(2 * s)]));
        }
    }
    return out;
}

MomentSet harmonic_stationary_quantum(double E, double omega, double hbar, int n_max) {
    if (E <= 0.0) throw std::invalid_argument("stationary energy must be positive");
    if (omega <= 0.0) throw std::invalid_argument("oscillator frequency must be positive");
    if (hbar < 0.0) throw std::invalid_argument("hbar must be >= 0");
    return harmonic_stationary_candidate(E, omega * omega, hbar, n_max);
}

MomentSet harmonic_stationary_classical(double E, double omega, int n_max) {
    if (E < 0.0) throw std::invalid_argument("stationary energy must be >= 0");
    if (omega <= 0.0) throw std::invalid_argument("oscillator frequency must be positive");
    const Rational Er = rational_from_double(E);
    const Rational w2 = rational_from_double(omega) * rational_from_double(omega);

    MomentSet out(Flavor::Classical, 0.0, n_max, 0.0, 0.0);
    for (int a2 = 0; 2 * a2 <= n_max; ++a2) {
        for (int b2 = 0; 2 * (a2 + b2) <= n_max; ++b2) {
            if (a2 + b2 == 0) continue;
            const int s = a2 + b2;
            const Rational val =
                Rational(factorial(2 * a2) * factorial(2 * b2),
                         factorial(a2) * factorial(b2) * factorial(s) * (BigInt(1) << s)) *
                rat_pow(Er, s) / rat_pow(w2, b2);
            out.set(2 * a2, 2 * b2, to_double(val));
        }
    }
    return out;
}

StationaryVerdict stationary_exists(const HarmonicSpec& spec, Flavor flavor) {
    switch (spec.kind()) {
        case HarmonicSpec::Kind::Oscillator:
            return {true, ""};
        case HarmonicSpec::Kind::InverseOscillator:
            // the stationary chain gives G^{0,2} = E/omega_sq < 0 (and more)
            return {false, "even-even negativity"};
        case HarmonicSpec::Kind::UniformForce:
            if (spec.beta != 0.0) return {false, "uniform force"};
            // free particle: a point at rest works classically, but any
            // nonzero momentum spread grows G^{0,2} ballistically
            if (flavor == Flavor::Classical) return {true, ""};
            return {false, "heisenberg"};
    }
    return {false, "unclassified"};
}

double oscillator_level(int n, double omega, double hbar) {
    if (n < 0) throw std::invalid_argument("level index must be >= 0");
    return hbar * omega * (static_cast<double>(n) + 0.5);
}

MomentSet ground_state_check(double omega, double hbar, int n_max) {
    if (omega <= 0.0 || hbar <= 0.0)
        throw std::invalid_argument("ground state needs omega > 0 and hbar > 0");
    return harmonic_stationary_quantum(0.5 * hbar * omega, omega, hbar, n_max);
}

}  // namespace mhier
