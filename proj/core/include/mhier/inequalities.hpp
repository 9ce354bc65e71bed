#pragma once

// Validity constraints a moment set must satisfy to come from a genuine
// probability distribution (classical) or Wigner function of a wavefunction
// (quantum): non-negativity of even-even moments, the uncertainty relation,
// and positive-semidefiniteness of star-product Gram matrices over centered
// operator words. The pairwise 2x2 specialization of the Gram test doubles
// as the feasibility oracle for ground-energy bounds and as the breakdown
// monitor for truncated trajectories.

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "mhier/moments.hpp"
#include "mhier/weyl.hpp"

namespace mhier {

struct Trajectory;

struct InequalityEntry {
    std::string id;
    double margin = 0.0;  // >= 0 passes
    bool pass = false;
};

struct InequalityReport {
    std::vector<InequalityEntry> entries;
    bool valid = true;
    double worst_margin = 0.0;
    std::string worst_id;

    void add(std::string id, double margin, double tol = 0.0);
};

// margin = G^{2n,2m} for every stored even-even key, in storage order
InequalityReport check_even_even(const MomentSet& state, double tol = 0.0);

// margin = G^{2,0} G^{0,2} - (G^{1,1})^2 - hbar^2/4
InequalityEntry check_heisenberg(const MomentSet& state);

// --- full Gram matrix --------------------------------------------------------

struct MomentMatrixResult {
    Eigen::MatrixXcd matrix;       // Hermitian by construction
    double min_eigenvalue = 0.0;
    double tol_psd = 0.0;          // 1e-10 * largest diagonal entry
    bool psd = false;              // min_eigenvalue >= -tol_psd
    std::vector<MomentKey> basis;  // word exponents (dp^a dq^b), a+b <= r
};

// Gram matrix M_ij = <conj(W_i) * W_j> over Weyl monomials W_{a,b} with
// a+b <= r, ordered by total order ascending and momentum power ascending
// within an order: (0,0), (0,1), (1,0), (0,2), (1,1), (2,0), ...
// Quantum entries use the star product at the state's hbar; hbar = 0 gives
// the real symmetric Hankel form M_{(a,b),(c,d)} = C^{a+c,b+d}.
// Requires 2r <= state.n_max.
MomentMatrixResult moment_matrix(const MomentSet& state, int half_order);

// --- pairwise word suite -----------------------------------------------------

// All 2x2 principal minors <conj(A)*A>, <conj(A)*B>, <conj(B)*B> over ordered
// words A, B in the letters {q, p} of length 1..half_order (letters act as
// deviation factors; words enumerate lexicographically with q before p, all
// pairs in that global order). Each 2x2 block must be PSD: diagonals
// non-negative and determinant >= 0.
class PairSuite {
  public:
    PairSuite(int half_order, int n_max, double hbar);

    int half_order() const { return half_order_; }
    int pair_count() const { return static_cast<int>(pairs_.size()); }
    const std::vector<std::string>& words() const { return words_; }

    // Scale-free feasibility margin of a single state: the worst, over all
    // pairs, of min(aa, bb, (aa*bb - |ab|^2) / max(|aa*bb|, 1e-30)).
    // Nonnegative (up to tolerance) iff every 2x2 block is PSD.
    double feasibility_margin(const double* moments) const;
    double feasibility_margin(const MomentSet& state) const;

    // Drift margin for trajectory monitoring: each pair's block is
    // normalized by its t=0 diagonals (congruence scaling), and the worst
    // minimum eigenvalue of the normalized blocks is returned. A sharply
    // negative value flags the truncation-induced breakdown; the threshold
    // is orders of magnitude below the O(1) calibrated scale.
    void calibrate(const double* moments0);
    double breakdown_margin(const double* moments) const;

    struct PairDetail {
        std::string word_a, word_b;
        double aa = 0.0, bb = 0.0;
        std::complex<double> ab{0.0, 0.0};
    };
    std::vector<PairDetail> evaluate(const double* moments) const;

  private:
    int half_order_ = 0;
    std::vector<std::string> words_;
    struct CompiledPair {
        int wa = 0, wb = 0;  // indices into words_
        weyl::CompiledExpectation aa, ab, bb;
        double aa0 = 1.0, bb0 = 1.0;  // calibration diagonals
    };
    std::vector<CompiledPair> pairs_;
    bool calibrated_ = false;
};

// --- trajectory monitoring ---------------------------------------------------

struct MonitorResult {
    int half_order = 0;
    bool violated = false;
    double t_first = 0.0;         // first time the margin crosses -threshold
    double t_first_over_T = 0.0;  // same, in units of the supplied period
    double worst_margin = 0.0;    // most negative margin seen anywhere
};

// Scan a trajectory with PairSuite breakdown margins (calibrated at the first
// sample) and report, per half-order, the earliest output time where the
// margin falls below -threshold. The default threshold sits far below any
// faithful-regime margin and far above the post-breakdown blow-up, so the
// crossing time is insensitive to its exact value.
std::vector<MonitorResult> monitor(const Trajectory& traj, const std::vector<int>& half_orders,
                                   double period, double threshold = 1e7);

// Report CSV rows "t,constraint_id,margin" for one state (even-even keys,
// heisenberg, and moment-matrix margins up to max_half_order).
std::string report_csv_rows(double t, const MomentSet& state, int max_half_order);

}  // namespace mhier
