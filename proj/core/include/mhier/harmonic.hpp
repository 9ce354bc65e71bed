#pragma once

// Closed forms for potentials with vanishing anharmonicity (uniform force,
// harmonic oscillator, inverse oscillator): the exact polynomial-in-t moment
// propagator of the force-free hierarchy, stationary moment towers, and
// existence verdicts for stationary states.

#include <string>

#include "mhier/moments.hpp"
#include "mhier/potential.hpp"

namespace mhier {

struct HarmonicSpec {
    double beta = 0.0;      // linear slope V'
    double omega_sq = 0.0;  // curvature V''

    enum class Kind { UniformForce, Oscillator, InverseOscillator };

    Kind kind() const {
        if (omega_sq > 0.0) return Kind::Oscillator;
        if (omega_sq < 0.0) return Kind::InverseOscillator;
        return Kind::UniformForce;
    }

    PolynomialPotential potential() const {
        return PolynomialPotential({0.0, beta, 0.5 * omega_sq});
    }

    // throws std::invalid_argument if V has degree > 2
    static HarmonicSpec from_potential(const PolynomialPotential& V);
};

// Exact propagator of the moment hierarchy when V'' = 0 (any uniform force):
//   G^{a,b}(t0 + t) = sum_{n=0}^{b} C(b,n) t^{b-n} G^{a+b-n,n}(t0),
// identical for both flavors and independent of the slope beta, which only
// drives the centroid: q += p t - beta t^2/2, p -= beta t.
MomentSet linear_evolution(const MomentSet& initial, double t, double beta = 0.0);
// validating overload: throws std::invalid_argument unless spec.omega_sq == 0
MomentSet linear_evolution(const MomentSet& initial, double t, const HarmonicSpec& spec);

// Stationary moment tower for V = omega_sq q^2 / 2 at energy E without any
// validity screening (omega_sq may be negative, in which case the returned
// "candidate" has negative even-even entries). Built exactly in rationals:
//   position chain  omega_sq (k+2) G^{0,k+2} = 2(k+1) E G^{0,k}
//                                              + (hbar^2/4)(k+1)k(k-1) G^{0,k-2}
//   mixed moments   G^{2a,2b} = (2a)!(2b)!/(2(a+b))! * (a+b)!/(a!b!)
//                               * omega_sq^a G^{0,2(a+b)}
// with every odd-index moment zero.
MomentSet harmonic_stationary_candidate(double E, double omega_sq, double hbar, int n_max);

// validated oscillator stationary state; requires E > 0, omega > 0, hbar >= 0
MomentSet harmonic_stationary_quantum(double E, double omega, double hbar, int n_max);

// classical stationary ensemble (microcanonical orbit average):
//   C^{2a,2b} = (2a)!(2b)! E^{a+b} / (a! b! (a+b)! 2^{a+b} omega^{2b}),
// odd-index moments zero; requires E >= 0, omega > 0
MomentSet harmonic_stationary_classical(double E, double omega, int n_max);

struct StationaryVerdict {
    bool exists = false;
    std::string reason;  // empty when exists; else "heisenberg",
                         // "even-even negativity", or "uniform force"
};

// Does the potential admit a stationary moment set of the given flavor?
//   beta != 0, omega_sq = 0 -> no (either flavor): the force never vanishes
//   free particle           -> classical yes (point at rest), quantum no
//                              (spread is ballistic for any uncertainty)
//   omega_sq > 0             -> yes
//   omega_sq < 0             -> no: the stationary chain forces negative
//                              even-even moments
StationaryVerdict stationary_exists(const HarmonicSpec& spec, Flavor flavor);

// oscillator spectrum E_n = hbar omega (n + 1/2)
double oscillator_level(int n, double omega, double hbar);

// Stationary state at the lowest level E_0 = hbar omega / 2; equals the
// minimum-uncertainty Gaussian gaussian_moments(hbar/omega, hbar, n_max).
MomentSet ground_state_check(double omega, double hbar, int n_max);

}  // namespace mhier
