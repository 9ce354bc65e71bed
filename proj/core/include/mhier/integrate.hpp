#pragma once

// Adaptive embedded Runge-Kutta (Dormand-Prince 5(4), FSAL) over the
// flattened hierarchy state (q, p, moments), with 4th-order dense output on
// a uniform grid, PI step control, and per-component absolute tolerances.
//
// A blow-up of the truncated system (step-size underflow or non-finite
// values) is not an exception: the valid prefix is returned with the
// `truncated` flag set, since late-time breakdown is itself an object of
// study for the constraint monitors.

#include <cstddef>
#include <vector>

#include "mhier/eom.hpp"
#include "mhier/moments.hpp"
#include "mhier/potential.hpp"

namespace mhier {

struct Trajectory {
    Flavor flavor = Flavor::Quantum;
    double hbar = 0.0;
    int n_max = 2;  // 1 for centroid-only (point) runs
    std::vector<double> times;
    std::vector<std::vector<double>> states;  // flattened (q, p, moments...)
    std::vector<double> h_eff;                // <H> per sample
    std::vector<double> psd_margin;           // optional, filled by the monitor
    bool truncated = false;                   // stopped before t_end
    double t_reached = 0.0;

    size_t size() const { return times.size(); }

    // unflatten one sample (n_max >= 2 runs only)
    MomentSet state_at(size_t i) const;
};

struct IntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-10;  // scalar; multiplied by per-component scales
    // per-component scale factors for atol; empty -> default_error_scales
    std::vector<double> scales;
    double dt_out = 0.0;  // output grid spacing; 0 -> t_end/512
    size_t max_steps = 100000000;
};

// Characteristic size of each state component, used to turn the scalar atol
// into a per-component vector: moments scale with the Gaussian vacuum value
// (2k-1)!! (hbar/2)^(ord/2) or the initial magnitude if larger, the centroid
// with the initial orbit size. reference_hbar overrides the state's hbar for
// the vacuum scale (used for classical twins of a quantum run; <= 0 picks
// the state's own hbar, or 1 if that is zero).
std::vector<double> default_error_scales(const MomentSet& initial,
                                         double reference_hbar = 0.0);

// core driver over any compiled right-hand side; y0 layout (q, p, moments)
Trajectory integrate_system(const CompiledRHS& rhs, const std::vector<double>& y0,
                            double t_end, const IntegrateOptions& opt);

Trajectory integrate(const MomentSet& initial, const PolynomialPotential& V,
                     const TruncationPolicy& policy, double t_end,
                     const IntegrateOptions& opt = {});

// positional-argument form
inline Trajectory integrate(const MomentSet& initial, const PolynomialPotential& V,
                            const TruncationPolicy& policy, double t_end, double rtol,
                            double atol, double dt_out) {
    IntegrateOptions opt;
    opt.rtol = rtol;
    opt.atol = atol;
    opt.dt_out = dt_out;
    return integrate(initial, V, policy, t_end, opt);
}

// centroid-only flow: all moments pinned to zero, states of size 2
Trajectory integrate_point(double q0, double p0, const PolynomialPotential& V, double t_end,
                           const IntegrateOptions& opt = {});

// Oscillation period from successive same-direction zero crossings of q(t),
// each refined by a parabola through the three samples around the crossing.
// Upward crossings are used when at least two lie strictly inside the run;
// otherwise downward crossings (one full period apart as well) are used.
// Returns 0 if neither direction yields two crossings.
double estimate_period(const Trajectory& traj);

}  // namespace mhier
