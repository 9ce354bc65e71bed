#include "mhier/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mhier/integrate.hpp"
#include "mhier/io.hpp"

namespace mhier {

void InequalityReport::add(std::string id, double margin, double tol) {
    const bool pass = margin >= -tol;
    if (entries.empty() || margin < worst_margin) {
        worst_margin = margin;
        worst_id = id;
    }
    if (!pass) valid = false;
    entries.push_back({std::move(id), margin, pass});
}

InequalityReport check_even_even(const MomentSet& state, double tol) {
    InequalityReport report;
    for (int idx = 0; idx < state.size(); ++idx) {
        const MomentKey key = MomentLayout::key_at(idx);
        if (key.a % 2 != 0 || key.b % 2 != 0) continue;
        std::ostringstream id;
        id << "even_even_" << key.a << "_" << key.b;
        report.add(id.str(), state.values[static_cast<size_t>(idx)], tol);
    }
    return report;
}

InequalityEntry check_heisenberg(const MomentSet& state) {
    const double g20 = state.get(2, 0);
    const double g02 = state.get(0, 2);
    const double g11 = state.get(1, 1);
    const double margin = g20 * g02 - g11 * g11 - 0.25 * state.hbar * state.hbar;
    return {"heisenberg", margin, margin >= 0.0};
}

// --- full Gram matrix --------------------------------------------------------

namespace {

std::vector<MomentKey> gram_basis(int half_order) {
    std::vector<MomentKey> basis;
    for (int ord = 0; ord <= half_order; ++ord)
        for (int a = 0; a <= ord; ++a) basis.push_back({a, ord - a});
    return basis;
}

}  // namespace

MomentMatrixResult moment_matrix(const MomentSet& state, int half_order) {
    if (half_order < 0) throw std::invalid_argument("half_order must be >= 0");
    if (2 * half_order > state.n_max)
        throw std::invalid_argument("moment matrix references orders beyond the state cutoff");

    MomentMatrixResult out;
    out.basis = gram_basis(half_order);
    const int n = static_cast<int>(out.basis.size());
    out.matrix = Eigen::MatrixXcd::Zero(n, n);

    std::vector<weyl::WeylPolynomial> mono(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        mono[static_cast<size_t>(i)] =
            weyl::WeylPolynomial::monomial(out.basis[static_cast<size_t>(i)].a,
                                           out.basis[static_cast<size_t>(i)].b);

    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            // monomial symbols are real, so conj(W_i) = W_i
            const auto prod = weyl::star_product(mono[static_cast<size_t>(i)],
                                                 mono[static_cast<size_t>(j)]);
            const std::complex<double> v = weyl::expectation(prod, state);
            out.matrix(i, j) = v;
            out.matrix(j, i) = std::conj(v);
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(out.matrix,
                                                           Eigen::EigenvaluesOnly);
    out.min_eigenvalue = solver.eigenvalues().minCoeff();
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, out.matrix(i, i).real());
    out.tol_psd = 1e-10 * max_diag;
    out.psd = out.min_eigenvalue >= -out.tol_psd;
    return out;
}

// --- pairwise word suite -----------------------------------------------------

namespace {

std::vector<std::string> words_up_to(int half_order) {
    std::vector<std::string> words;
    for (int d = 1; d <= half_order; ++d) {
        for (int mask = 0; mask < (1 << d); ++mask) {
            std::string w(static_cast<size_t>(d), 'q');
            for (int pos = 0; pos < d; ++pos)
                if (mask & (1 << (d - 1 - pos))) w[static_cast<size_t>(pos)] = 'p';
            words.push_back(std::move(w));
        }
    }
    return words;
}

}  // namespace

PairSuite::PairSuite(int half_order, int n_max, double hbar) : half_order_(half_order) {
    if (half_order < 1) throw std::invalid_argument("pair suite needs half_order >= 1");
    if (2 * half_order > n_max)
        throw std::invalid_argument("pair suite references orders beyond the cutoff");

    words_ = words_up_to(half_order);
    std::vector<weyl::WeylPolynomial> sym, adj;
    sym.reserve(words_.size());
    adj.reserve(words_.size());
    for (const auto& w : words_) {
        sym.push_back(weyl::operator_word(w));
        adj.push_back(weyl::operator_word_adjoint(w));
    }

    const int nw = static_cast<int>(words_.size());
    for (int i = 0; i < nw; ++i) {
        for (int j = i + 1; j < nw; ++j) {
            CompiledPair cp;
            cp.wa = i;
            cp.wb = j;
            cp.aa = weyl::compile_expectation(
                weyl::star_product(adj[static_cast<size_t>(i)], sym[static_cast<size_t>(i)]),
                n_max, hbar);
            cp.ab = weyl::compile_expectation(
                weyl::star_product(adj[static_cast<size_t>(i)], sym[static_cast<size_t>(j)]),
                n_max, hbar);
            cp.bb = weyl::compile_expectation(
                weyl::star_product(adj[static_cast<size_t>(j)], sym[static_cast<size_t>(j)]),
                n_max, hbar);
            pairs_.push_back(std::move(cp));
        }
    }
}

double PairSuite::feasibility_margin(const double* moments) const {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& pr : pairs_) {
        const double aa = pr.aa.eval(moments).real();
        const double bb = pr.bb.eval(moments).real();
        const std::complex<double> ab = pr.ab.eval(moments);
        const double det = aa * bb - std::norm(ab);
        const double scale = std::max(std::abs(aa * bb), 1e-30);
        worst = std::min({worst, aa, bb, det / scale});
    }
    return worst;
}

double PairSuite::feasibility_margin(const MomentSet& state) const {
    return feasibility_margin(state.values.data());
}

void PairSuite::calibrate(const double* moments0) {
    for (auto& pr : pairs_) {
        pr.aa0 = std::max(pr.aa.eval(moments0).real(), 1e-300);
        pr.bb0 = std::max(pr.bb.eval(moments0).real(), 1e-300);
    }
    calibrated_ = true;
}

double PairSuite::breakdown_margin(const double* moments) const {
    if (!calibrated_) throw std::logic_error("breakdown_margin needs calibrate() first");
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& pr : pairs_) {
        const double aa = pr.aa.eval(moments).real() / pr.aa0;
        const double bb = pr.bb.eval(moments).real() / pr.bb0;
        const std::complex<double> ab = pr.ab.eval(moments) / std::sqrt(pr.aa0 * pr.bb0);
        const double tr = aa + bb;
        const double det = aa * bb - std::norm(ab);
        const double disc = std::max(tr * tr - 4.0 * det, 0.0);
        const double lambda_min = 0.5 * (tr - std::sqrt(disc));
        worst = std::min(worst, lambda_min);
    }
    return worst;
}

std::vector<PairSuite::PairDetail> PairSuite::evaluate(const double* moments) const {
    std::vector<PairDetail> out;
    out.reserve(pairs_.size());
    for (const auto& pr : pairs_) {
        PairDetail d;
        d.word_a = words_[static_cast<size_t>(pr.wa)];
        d.word_b = words_[static_cast<size_t>(pr.wb)];
        d.aa = pr.aa.eval(moments).real();
        d.bb = pr.bb.eval(moments).real();
        d.ab = pr.ab.eval(moments);
        out.push_back(std::move(d));
    }
    return out;
}

// --- trajectory monitoring ---------------------------------------------------

std::vector<MonitorResult> monitor(const Trajectory& traj, const std::vector<int>& half_orders,
                                   double period, double threshold) {
    if (traj.size() == 0) throw std::invalid_argument("empty trajectory");
    if (period <= 0.0) throw std::invalid_argument("period must be positive");

    std::vector<MonitorResult> results;
    for (int r : half_orders) {
        PairSuite suite(r, traj.n_max, traj.hbar);
        suite.calibrate(traj.states[0].data() + 2);

        MonitorResult res;
        res.half_order = r;
        res.worst_margin = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < traj.size(); ++i) {
            const double margin = suite.breakdown_margin(traj.states[i].data() + 2);
            res.worst_margin = std::min(res.worst_margin, margin);
            if (!res.violated && margin < -threshold) {
                res.violated = true;
                res.t_first = traj.times[i];
                res.t_first_over_T = traj.times[i] / period;
            }
        }
        results.push_back(res);
    }
    return results;
}

std::string report_csv_rows(double t, const MomentSet& state, int max_half_order) {
    std::ostringstream out;
    const auto ee = check_even_even(state);
    for (const auto& e : ee.entries)
        out << format_g17(t) << ',' << e.id << ',' << format_g17(e.margin) << '\n';
    const auto h = check_heisenberg(state);
    out << format_g17(t) << ',' << h.id << ',' << format_g17(h.margin) << '\n';
    for (int r = 1; r <= max_half_order; ++r) {
        if (2 * r > state.n_max) break;
        const auto mm = moment_matrix(state, r);
        out << format_g17(t) << ",gram_min_eig_r" << r << ','
            << format_g17(mm.min_eigenvalue) << '\n';
    }
    return out.str();
}

}  // namespace mhier
