#pragma once

// Brute-force reference solvers, independent of the moment hierarchy, used
// to validate it:
//   * liouville_mc      - classical moments from a Monte-Carlo phase-space
//                         ensemble evolved along point trajectories (method
//                         of characteristics for the Liouville equation)
//   * schrodinger_grid  - quantum observables from split-operator
//                         propagation of the wavefunction on a uniform grid
//   * ground_state_grid - lowest eigenpair of the Hamiltonian by
//                         finite-difference diagonalization with Richardson
//                         extrapolation in the grid spacing
//
// Both time-dependent solvers report on the same uniform output grid the
// integrator uses (samples at k*dt_out), so their series can be compared
// to hierarchy trajectories index by index.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mhier/integrate.hpp"
#include "mhier/moments.hpp"
#include "mhier/potential.hpp"

namespace mhier {

// Ensemble of independent Gaussian phase-space samples. Draws come from a
// counter-based generator keyed on (seed, sample index), so the ensemble is
// reproducible bit for bit regardless of how the work is split over threads.
struct EnsembleSpec {
    std::size_t n = 100000;  // sample count (>= 1e4 for order-4 moment work)
    std::uint64_t seed = 1;
    double sigma_q = 1.0;  // standard deviation per axis
    double sigma_p = 1.0;
    double q0 = 0.0;  // ensemble center
    double p0 = 0.0;
};

// Ensemble whose centroid and second moments match `initial` (which must
// carry no q-p correlation: G^{1,1} = 0).
EnsembleSpec matching_ensemble(const MomentSet& initial, std::size_t n,
                               std::uint64_t seed);

struct McResult {
    // flavor Classical, n_max = 4: centroid plus every central moment of
    // the evolving cloud with a+b <= 4, taken about the sample centroid;
    // h_eff is the sampled mean energy.
    Trajectory traj;
    // Standard error of each state column (layout matches traj.states) and
    // of the mean energy, estimated from `batches` disjoint sub-ensembles.
    std::vector<std::vector<double>> stderrs;
    std::vector<double> h_stderr;
    int batches = 16;
};

// Evolve every sample along its point trajectory (classical RK4 with fixed
// substeps of at most dt_max; dt_max = 0 picks dt_out/16) and report the
// sampled central moments on the uniform output grid. dt_out = 0 picks
// t_end/512. Deterministic for a fixed spec: samples are drawn per index
// and partial sums are reduced in a fixed batch order.
McResult liouville_mc(const EnsembleSpec& spec, const PolynomialPotential& V,
                      double t_end, double dt_out, double dt_max = 0.0);

// Initial wavefunction (q0, p0, width2 follow the gaussian_moments
// convention: position variance width2/2, minimal-uncertainty momentum
// spread hbar^2/(2 width2)).
struct GaussianPacket {
    double width2 = 1.0;
    double q0 = 0.0;
    double p0 = 0.0;
};

// Uniform grid on [-L, L] with M points. Zero fields are resolved
// automatically before the run:
//   half_width: 2.5x the classical orbit cover (turning point of the
//               packet energy, or the ballistic excursion when the
//               potential does not confine), padded by the packet width;
//   points:     smallest power of two >= 4096 such that
//               dx < min(width, hbar/p_cover)/8, i.e. at least eight points
//               per packet width and per reduced de Broglie wavelength;
//   dt:         1e-5 of the orbit period (or of t_end when no period
//               exists); always <= dt_out.
struct GridSpec {
    double half_width = 0.0;
    int points = 0;  // power of two
    double dt = 0.0;
};

struct GridResult {
    // flavor Quantum, n_max = 4: q, p, G^{0,n} and G^{m,0} for n,m <= 4,
    // and G^{1,1} (symmetrized). Mixed moments beyond G^{1,1} are not
    // extracted from the grid and are stored as NaN. h_eff is <H>.
    Trajectory traj;
    double half_width = 0.0;  // grid parameters actually used
    int points = 0;
    double dt = 0.0;
    double max_norm_drift = 0.0;     // max |norm - 1| over output times
    double max_boundary_prob = 0.0;  // mass in the outer 1/16 of each side
};

// Strang split-operator propagation of psi0 under H = p^2/2 + V(q).
// Throws on norm drift beyond 1e-10 * max(1, t) or boundary probability
// reaching 1e-12 (the grid no longer represents the state), and when an
// explicitly supplied grid violates the sampling rule above.
GridResult schrodinger_grid(const GridSpec& spec, const PolynomialPotential& V,
                            const GaussianPacket& psi0, double hbar,
                            double t_end, double dt_out);

struct GroundStateResult {
    double energy = 0.0;  // Richardson-extrapolated eigenvalue
    // central moments of the ground state: G^{0,n} for n = 0..8 and
    // G^{m,0} for m = 0..4 (odd entries vanish for symmetric wells)
    std::array<double, 9> position_moments{};
    std::array<double, 5> momentum_moments{};
    double energy_delta = 0.0;  // |E(finest grid) - energy|
    int points = 0;             // finest grid size used
    double half_width = 0.0;
};

// Lowest eigenpair of -hbar^2/2 d^2/dx^2 + V on a symmetric box, from the
// second-order finite-difference tridiagonal matrix at spec.points and
// 2*spec.points with Richardson extrapolation of the energy. Moments are
// quadratures of the finer eigenvector (momentum side via FFT). Requires a
// confining polynomial: degree 2 or 4 with positive leading coefficient.
GroundStateResult ground_state_grid(const PolynomialPotential& V, double hbar,
                                    const GridSpec& spec = {});

}  // namespace mhier
