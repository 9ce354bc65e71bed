#pragma once

// Stationary states of the quartic anharmonic hierarchy as fixed points of
// the truncated equations of motion: the (E, G^{0,2})-parameterized linear
// solve, the general position-moment recursion, cutoff-convergence studies,
// and two-sided ground-energy bounds from the constraint suite.

#include <string>
#include <vector>

#include "mhier/moments.hpp"

namespace mhier {

// G^{0,n} for n = 0..max_order of a stationary state in V(q) = c q^m centered
// at q = 0, from the chain
//   c (2k + m + 2) G^{0,k+m} = 2 E (k+1) G^{0,k}
//                              + (hbar^2/4) (k+1) k (k-1) G^{0,k-2};
// the classical flavor drops the hbar^2 term. seeds supplies G^{0,0..m-1}
// (G^{0,0} = 1, G^{0,1} = 0, free low moments such as G^{0,2} for m = 4).
std::vector<double> position_recursion(int m, double c, double E, double hbar,
                                       const std::vector<double>& seeds, int max_order,
                                       Flavor flavor = Flavor::Quantum);

struct StationarySolution {
    MomentSet state;  // q = p = 0, moments up to the requested cutoff
    double E = 0.0;
    double G02 = 0.0;
    double lambda = 0.0;
    double hbar = 0.0;
    // worst relative residual of the stationarity equations over interior
    // targets (order <= n_max - 4); boundary orders feel the cutoff directly
    double residual = 0.0;
    bool valid = true;          // all stored even-even moments >= 0
    std::string reject_reason;  // first offending moment when invalid
};

// Fixed point of the truncated quartic hierarchy (V = lambda q^4) with free
// parameters E and G^{0,2}. The stationarity conditions at q = p = 0 with
// vanishing odd moments reduce to a triangular linear system,
//   b G^{a+1,b-1} = 4 a lambda G^{a-1,b+3}
//                   - hbar^2 lambda a (a-1) (a-2) G^{a-3,b+1},
// fed by the m = 4 position chain and E = G^{2,0}/2 + lambda G^{0,4}.
// Solved exactly in rationals at an enlarged internal cutoff n_max + 4 with
// moments above the internal cutoff set to zero; the reported window
// (<= n_max) then satisfies the untruncated interior equations exactly.
// Requires E > 0, G02 > 0, lambda > 0, hbar >= 0, n_max >= 6.
StationarySolution solve_quartic_stationary(double E, double G02, double lambda, double hbar,
                                            int n_max);

// Agreement horizon between quartic solutions at increasing cutoffs: for each
// consecutive pair of cutoffs, the largest order through which every moment
// of the two solutions agrees to relative 1e-10.
struct ConvergencePair {
    int cutoff_lo = 0, cutoff_hi = 0;
    int agreement_order = 0;
    // worst relative difference per order (index = order - 2), up to cutoff_lo
    std::vector<double> max_rel_by_order;
};

struct ConvergenceStudy {
    std::vector<int> cutoffs;
    std::vector<ConvergencePair> pairs;
};

// cutoffs must be sorted ascending
ConvergenceStudy convergence_study(double E, double G02, double lambda, double hbar,
                                   const std::vector<int>& cutoffs);

// Two-sided bound on the ground energy in units of (hbar^4 lambda)^{1/3}:
// along the uncertainty-saturating family G^{0,2} = 3 hbar^2 / (16 E), scan
// E over a grid, test feasibility with the pairwise constraint suite at
// half-order max_inequality_order/2, and sharpen both feasibility edges by
// bisection.
struct BoundsResult {
    int order = 0;  // max_inequality_order (4 or 6)
    double lower = 0.0, upper = 0.0;
    int grid = 0;
    std::string refined_by = "bisection";
    std::vector<double> grid_energies;  // scan abscissae, unit (hbar^4 lambda)^{1/3}
    std::vector<char> grid_feasible;    // 1 = feasible at that abscissa
};

// throws std::runtime_error if no grid point is feasible
BoundsResult ground_energy_bounds(double lambda, double hbar, int max_inequality_order,
                                  int grid_points = 61, double e_lo = 0.3, double e_hi = 1.2);

}  // namespace mhier
