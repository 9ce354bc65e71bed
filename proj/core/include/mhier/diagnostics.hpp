#pragma once

// Comparison metrics between aligned runs: the cutoff-convergence distance
// Delta_n, the split of the deviation from the point trajectory into a
// distributional part (present for any finite-width ensemble) and a purely
// quantum part (sourced by the explicit hbar^2 terms), the semiclassicality
// ratio gamma built from those two, and classical-orbit reference extremes
// for the quartic well.

#include <string>
#include <vector>

#include "mhier/integrate.hpp"
#include "mhier/moments.hpp"
#include "mhier/potential.hpp"

namespace mhier {

// Three aligned runs on one output grid: the centroid-only point trajectory,
// the classical hierarchy, and the quantum hierarchy, all from the same
// potential and initial data (the classical twin starts from the quantum
// run's moments).
struct ComparisonSet {
    std::vector<double> times;
    std::vector<double> q_class, p_class;  // point trajectory
    std::vector<double> q_c, p_c;          // classical hierarchy centroid
    std::vector<double> q_q, p_q;          // quantum hierarchy centroid
    double period = 0.0;                   // from the point trajectory's zero crossings
};

// Assemble a ComparisonSet from three existing runs; throws when the output
// grids do not match sample for sample.
ComparisonSet align_comparison(const Trajectory& point, const Trajectory& classical,
                               const Trajectory& quantum);

// Run all three flavors from one initial state and align them. The point
// run starts at the initial centroid; the classical hierarchy starts from
// the quantum run's moments.
ComparisonSet compare_runs(const MomentSet& initial, const PolynomialPotential& V,
                           const TruncationPolicy& policy, double t_end,
                           const IntegrateOptions& opt = {});

// Squared phase-space distance (q_a - q_b)^2 + (p_a - p_b)^2 per output
// sample; the two runs must share the output grid. Used with consecutive
// cutoffs n and n-1 (the order-1 "hierarchy" is the point trajectory).
std::vector<double> delta_n(const Trajectory& a, const Trajectory& b);

struct Decomposition {
    std::vector<double> t_over_T;  // times over the period (raw times if none)
    std::vector<double> delta1_q, delta2_q;  // classical-minus-point, quantum-minus-classical
    std::vector<double> delta1_p, delta2_p;
    std::vector<double> delta1_sq, delta2_sq;  // (dq)^2 + (dp)^2 per sample
    // prefix ratio max delta2^2 / max delta1^2 up to each sample; NaN while
    // the denominator is below the 1e-30 guard
    std::vector<double> gamma_running;
    double gamma = 0.0;          // ratio of windowed maxima over the final period
    bool gamma_defined = false;  // false when delta1^2 never exceeded the guard
    double period = 0.0;
};

Decomposition decompose(const ComparisonSet& cmp);

// spec-fixed CSV body for a decomposition (no header line)
std::string decomposition_csv_rows(const Decomposition& d);

struct OrbitReferences {
    double q_max = 0.0;     // q_max^4 = E/lambda
    double p_max_sq = 0.0;  // 2E
    double r2_max = 0.0;    // max of p^2 + q^2 on the orbit
    // true when the interior critical point of p^2+q^2 exists
    // (1/(4 lambda) <= sqrt(E/lambda)); otherwise r2_max compares endpoints
    bool interior_critical_point = true;
};

// classical extremes of the pure quartic orbit V = lambda q^4 at energy e
OrbitReferences orbit_references(double e_class, double lambda);

// closed-form period of that orbit: 4 (e/lambda)^{1/4} I / sqrt(2 e) with
// I = int_0^1 du / sqrt(1 - u^4)
double quartic_period(double e_class, double lambda);

struct PhaseStructure {
    double lag_q = 0.0;  // cross-correlation lag of delta1_q against delta2_q
    double lag_p = 0.0;
    double lag_q_over_T = 0.0;
    double lag_p_over_T = 0.0;
    int critical_points_q = 0;  // extrema of delta1_q per half-cycle
    int critical_points_p = 0;
    bool common_zero = false;  // all four deltas simultaneously at zero (t > 0)
    double period = 0.0;
};

// Dephasing and oscillation structure of the deltas; needs at least two
// full periods of data.
PhaseStructure phase_structure(const ComparisonSet& cmp);

}  // namespace mhier
