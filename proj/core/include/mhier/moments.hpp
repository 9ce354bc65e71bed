#pragma once

// Central-moment state of a one-particle distribution: centroid (q, p) plus
// all Weyl-ordered central moments G^{a,b} = <(dp)^a (dq)^b>_Weyl with
// 2 <= a+b <= n_max. Order 0 is identically 1 and order 1 vanishes by the
// centered definition, so neither is stored.
//
// Storage layout: dense triangular, order ascending, momentum power `a`
// descending within each order -- i.e. G^{2,0}, G^{1,1}, G^{0,2}, G^{3,0},...
// This matches the trajectory CSV column order and keeps the RHS evaluation
// cache-friendly.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhier/potential.hpp"

namespace mhier {

enum class Flavor { Quantum, Classical };

inline const char* flavor_name(Flavor f) {
    return f == Flavor::Quantum ? "quantum" : "classical";
}

struct MomentKey {
    int a = 0;  // momentum-deviation power
    int b = 0;  // position-deviation power
    int order() const { return a + b; }
    bool operator==(const MomentKey&) const = default;
    bool operator<(const MomentKey& o) const {
        if (order() != o.order()) return order() < o.order();
        return a > o.a;  // within an order, a descends
    }
};

struct MomentLayout {
    // number of stored moments for a cutoff
    static int count(int n_max) { return (n_max + 1) * (n_max + 2) / 2 - 3; }

    // index of (a,b) in the dense vector; requires 2 <= a+b <= n_max
    static int index(int a, int b) {
        const int ord = a + b;
        // moments of orders 2..ord-1 occupy ord(ord+1)/2 - 3 slots
        return ord * (ord + 1) / 2 - 3 + (ord - a);
    }

    static MomentKey key_at(int idx) {
        int ord = 2;
        while ((ord + 1) * (ord + 2) / 2 - 3 <= idx) ++ord;
        const int base = ord * (ord + 1) / 2 - 3;
        return MomentKey{ord - (idx - base), idx - base};
    }
};

struct MomentSet {
    Flavor flavor = Flavor::Quantum;
    double hbar = 0.0;  // must be 0 for Classical
    int n_max = 2;
    double q = 0.0;
    double p = 0.0;
    std::vector<double> values;  // MomentLayout order

    MomentSet() = default;
    MomentSet(Flavor f, double hb, int nmax, double q0 = 0.0, double p0 = 0.0)
        : flavor(f), hbar(hb), n_max(nmax), q(q0), p(p0),
          values(static_cast<size_t>(MomentLayout::count(nmax)), 0.0) {
        validate_shape();
    }

    void validate_shape() const {
        if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");
        if (flavor == Flavor::Classical && hbar != 0.0)
            throw std::invalid_argument("classical moment set must carry hbar = 0");
        if (hbar < 0.0) throw std::invalid_argument("hbar must be >= 0");
        if (values.size() != static_cast<size_t>(MomentLayout::count(n_max)))
            throw std::invalid_argument("moment vector size does not match cutoff");
    }

    int size() const { return static_cast<int>(values.size()); }

    // G^{a,b} with the order-0/1 identities applied
    double get(int a, int b) const {
        if (a < 0 || b < 0) return 0.0;
        const int ord = a + b;
        if (ord == 0) return 1.0;
        if (ord == 1) return 0.0;
        if (ord > n_max) throw std::out_of_range("moment order beyond cutoff");
        return values[static_cast<size_t>(MomentLayout::index(a, b))];
    }

    void set(int a, int b, double v) {
        const int ord = a + b;
        if (ord < 2 || ord > n_max) throw std::out_of_range("moment order outside [2, n_max]");
        values[static_cast<size_t>(MomentLayout::index(a, b))] = v;
    }

    // the same distribution carried by a classical (hbar = 0) state
    MomentSet as_classical() const {
        MomentSet c = *this;
        c.flavor = Flavor::Classical;
        c.hbar = 0.0;
        return c;
    }
};

struct TruncationPolicy {
    int n_max = 2;
};

// Moments of a Gaussian phase-space distribution / wavefunction with
// position variance width2/2 and the Heisenberg-paired momentum spread:
//   G^{2a,2b} = (2a-1)!! (2b-1)!! (hbar^2/(2 width2))^a (width2/2)^b,
// odd-index moments zero. width2 = hbar reproduces the minimal-uncertainty
// packet with G^{0,2} = G^{2,0} = hbar/2.
MomentSet gaussian_moments(double width2, double hbar, int n_max, double q0 = 0.0,
                           double p0 = 0.0);

// <H> expanded about the centroid:
//   p^2/2 + V(q) + G^{2,0}/2 + sum_{n>=2} V^(n)(q) G^{0,n} / n!
double effective_hamiltonian(const MomentSet& state, const PolynomialPotential& V);

// bare centroid energy p^2/2 + V(q)
double centroid_energy(const MomentSet& state, const PolynomialPotential& V);

// JSON round-trip ({flavor, hbar, n_max, q, p, moments:[{a,b,value}]};
// moments omitted from the list default to 0)
std::string to_json(const MomentSet& state);
MomentSet moment_set_from_json(const std::string& json_text);

}  // namespace mhier
