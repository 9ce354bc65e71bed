#pragma once

// Hand-coded right-hand sides of the truncated moment hierarchy.
//
// Centroid:   dq/dt = p
//             dp/dt = -V'(q) - sum_{n>=2} V^{(n+1)}(q) G^{0,n} / n!
// Moments:    dG^{a,b}/dt = b G^{a+1,b-1}
//               + a sum_{n>=2} V^{(n)}(q)/(n-1)! [G^{0,n-1} G^{a-1,b} - G^{a-1,b+n-1}]
//               - sum_{n>=3} sum_{k=1}^{M} V^{(n)}(q)/(n-2k-1)! C(a,2k+1) (-hbar^2/4)^k
//                   G^{a-2k-1, b+n-2k-1},   M = floor((min(a,n)-1)/2)
// with the classical flavor dropping the hbar line entirely.
//
// Truncation is the uniform rule "drop any term whose moment factor has order
// above n_max" (orders 0/1 reduce via G^{0,0}=1, order-1 = 0). This single
// rule reproduces every per-sum cap of the truncated system, and the term
// lists are asserted identical to the independent symbolic derivation in
// weyl.hpp, which is the anti-typo defense for the transcription above.

#include <map>
#include <vector>

#include "mhier/moments.hpp"
#include "mhier/potential.hpp"
#include "mhier/weyl.hpp"

namespace mhier {

struct Trajectory;  // integrate.hpp

// exact term list of dG^{a,b}/dt assembled from the displayed formula
weyl::MomentEOM hand_moment_eom(int a, int b, const PolynomialPotential& V, Flavor flavor,
                                const TruncationPolicy& policy);

// exact term list of dp/dt (constant part plus one G^{0,n} factor per term)
std::vector<weyl::EOMTerm> hand_centroid_force(const PolynomialPotential& V, Flavor flavor,
                                               const TruncationPolicy& policy);

// full hierarchy, targets in storage order
std::vector<weyl::MomentEOM> hand_hierarchy(const PolynomialPotential& V, Flavor flavor,
                                            const TruncationPolicy& policy);

// Flattened, allocation-free evaluator over the state vector
// y = (q, p, moments in MomentLayout order). Immutable after construction and
// safe to share across threads.
struct CompiledRHS {
    PolynomialPotential V;
    Flavor flavor = Flavor::Quantum;
    double hbar = 0.0;
    TruncationPolicy policy;
    int dim = 0;        // stored moment count
    int max_q_pow = 0;  // highest centroid power appearing in any term

    // moment factor slot == dim means the constant 1
    struct Term {
        int target;
        double coeff;  // hbar powers folded in
        int q_pow;
        int f1, f2;
    };
    std::vector<Term> terms;

    struct ForceTerm {
        double coeff;
        int q_pow;
        int f;
    };
    std::vector<ForceTerm> force;

    int state_size() const { return dim + 2; }

    // dy/dt for the full flattened state
    void eval(const double* y, double* dy) const;

    // dp/dt alone
    double force_at(double q, const double* moments) const;

    // <H> on the flattened state (conservation monitor)
    double h_eff(const double* y) const;
};

// production path: compile the hand-coded hierarchy
CompiledRHS compile_rhs(const PolynomialPotential& V, Flavor flavor, double hbar,
                        const TruncationPolicy& policy);

// compile any term-list system (e.g. the weyl-derived one) for cross-checks
CompiledRHS compile_rhs_from(const std::vector<weyl::MomentEOM>& system,
                             const std::vector<weyl::EOMTerm>& force_terms,
                             const PolynomialPotential& V, Flavor flavor, double hbar,
                             const TruncationPolicy& policy);

// spec'd convenience forms over MomentSet
std::pair<double, double> rhs_centroid(const MomentSet& state, const PolynomialPotential& V,
                                       const TruncationPolicy& policy);
std::map<MomentKey, double> rhs_moments(const MomentSet& state, const CompiledRHS& compiled);

// Finite-difference check of d^2q/dt^2 + V'(q) + sum_{n>=3} V^{(n)}(q) G^{0,n-1}/n!
// on a uniformly sampled trajectory; entry i is the residual at sample i+1
// (centered second differences need both neighbours). Requires >= 3 samples.
std::vector<double> corrected_newton_residual(const Trajectory& traj,
                                              const PolynomialPotential& V);

}  // namespace mhier
