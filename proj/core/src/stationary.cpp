#include "mhier/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mhier/eom.hpp"
#include "mhier/inequalities.hpp"
#include "mhier/rational.hpp"

namespace mhier {

std::vector<double> position_recursion(int m, double c, double E, double hbar,
                                       const std::vector<double>& seeds, int max_order,
                                       Flavor flavor) {
    if (m < 1) throw std::invalid_argument("potential power must be >= 1");
    if (c == 0.0) throw std::invalid_argument("potential coefficient must be nonzero");
    if (static_cast<int>(seeds.size()) < m)
        throw std::invalid_argument("need seed moments G^{0,0}..G^{0,m-1}");
    if (max_order < 0) throw std::invalid_argument("max_order must be >= 0");

    const Rational cr = rational_from_double(c);
    const Rational Er = rational_from_double(E);
    const Rational hb2 = flavor == Flavor::Quantum
                             ? rational_from_double(hbar) * rational_from_double(hbar)
                             : Rational(0);

    std::vector<Rational> g(static_cast<size_t>(max_order) + 1, Rational(0));
    for (int n = 0; n <= std::min(m - 1, max_order); ++n)
        g[static_cast<size_t>(n)] = rational_from_double(seeds[static_cast<size_t>(n)]);

    for (int k = 0; k + m <= max_order; ++k) {
        Rational z = Rational(2 * (k + 1)) * Er * g[static_cast<size_t>(k)];
        if (k >= 2)
            z += hb2 * Rational(BigInt((k + 1) * k * (k - 1)), BigInt(4)) *
                 g[static_cast<size_t>(k - 2)];
        g[static_cast<size_t>(k + m)] = z / (cr * Rational(2 * k + m + 2));
    }

    std::vector<double> out(g.size());
    for (size_t i = 0; i < g.size(); ++i) out[i] = to_double(g[i]);
    return out;
}

namespace {

// dense rational table over 2 <= a+b <= n_int with the order-0/1 identities
struct RationalTable {
    int n_int;
    std::vector<Rational> values;

    explicit RationalTable(int n)
        : n_int(n), values(static_cast<size_t>(MomentLayout::count(n)), Rational(0)) {}

    Rational get(int a, int b) const {
        if (a < 0 || b < 0) return Rational(0);
        const int ord = a + b;
        if (ord == 0) return Rational(1);
        if (ord == 1) return Rational(0);
        if (ord > n_int) return Rational(0);  // truncated: sources beyond cutoff vanish
        return values[static_cast<size_t>(MomentLayout::index(a, b))];
    }

    void set(int a, int b, const Rational& v) {
        values[static_cast<size_t>(MomentLayout::index(a, b))] = v;
    }
};

}  // namespace

StationarySolution solve_quartic_stationary(double E, double G02, double lambda, double hbar,
                                            int n_max) {
    if (E <= 0.0) throw std::invalid_argument("stationary energy must be positive");
    if (G02 <= 0.0) throw std::invalid_argument("G^{0,2} must be positive");
    if (lambda <= 0.0) throw std::invalid_argument("quartic coupling must be positive");
    if (hbar < 0.0) throw std::invalid_argument("hbar must be >= 0");
    if (n_max < 6) throw std::invalid_argument("quartic stationary solve needs n_max >= 6");

    const int n_int = n_max + 4;
    const Rational Er = rational_from_double(E);
    const Rational G02r = rational_from_double(G02);
    const Rational lam = rational_from_double(lambda);
    const Rational hb2 = rational_from_double(hbar) * rational_from_double(hbar);

    RationalTable g(n_int);

    // position chain: 2 lambda (k+3) G^{0,k+4} = 2 E (k+1) G^{0,k}
    //                 + (hbar^2/4) (k+1) k (k-1) G^{0,k-2}
    g.set(0, 2, G02r);
    g.set(0, 4, Er / (Rational(3) * lam));
    for (int k = 2; k + 4 <= n_int; k += 2) {
        Rational z = Rational(2 * (k + 1)) * Er * g.get(0, k);
        z += hb2 * Rational(BigInt((k + 1) * k * (k - 1)), BigInt(4)) * g.get(0, k - 2);
        g.set(0, k + 4, z / (Rational(2 * (k + 3)) * lam));
    }

    // momentum lattice, increasing first index:
    // b G^{a+1,b-1} = 4 a lambda G^{a-1,b+3} - hbar^2 lambda a(a-1)(a-2) G^{a-3,b+1}
    for (int a_new = 2; a_new <= n_int; ++a_new) {
        const int a = a_new - 1;
        for (int b = 1; a + b <= n_int; ++b) {
            if (a_new + b - 1 < 2) continue;  // order-1 slot, identically zero
            Rational z = Rational(4 * a) * lam * g.get(a - 1, b + 3);
            if (a >= 3)
                z -= hb2 * lam * Rational(a * (a - 1) * (a - 2)) * g.get(a - 3, b + 1);
            g.set(a_new, b - 1, z / Rational(b));
        }
    }

    StationarySolution sol;
    sol.E = E;
    sol.G02 = G02;
    sol.lambda = lambda;
    sol.hbar = hbar;
    sol.state = MomentSet(hbar > 0.0 ? Flavor::Quantum : Flavor::Classical, hbar, n_max);

    // Negativity only disqualifies a solution where the cutoff has actually
    // pinned the moments down: successive-cutoff solutions agree to about
    // order n_max/2 + 2 (the measured agreement horizon), while entries above
    // that window routinely dip negative as pure truncation pollution even
    // for physically sound parameters.
    const int validity_window = (n_max / 2 + 2) / 2 * 2;
    for (int idx = 0; idx < sol.state.size(); ++idx) {
        const MomentKey key = MomentLayout::key_at(idx);
        const Rational v = g.get(key.a, key.b);
        sol.state.values[static_cast<size_t>(idx)] = to_double(v);
        if (key.a % 2 == 0 && key.b % 2 == 0 && key.order() <= validity_window && v < 0 &&
            sol.valid) {
            sol.valid = false;
            std::ostringstream reason;
            reason << "negative even-even moment G^{" << key.a << "," << key.b << "}";
            sol.reject_reason = reason.str();
        }
    }

    // residual of the full (run-cutoff) equations on interior targets; the
    // enlarged internal solve makes these exact up to floating error
    const CompiledRHS rhs = compile_rhs(PolynomialPotential::quartic(lambda),
                                        sol.state.flavor, hbar, TruncationPolicy{n_max});
    const int interior = std::max(2, n_max - 4);
    std::vector<double> y(static_cast<size_t>(rhs.state_size()), 0.0);
    std::copy(sol.state.values.begin(), sol.state.values.end(), y.begin() + 2);
    std::vector<double> sum(static_cast<size_t>(rhs.dim), 0.0);
    std::vector<double> mag(static_cast<size_t>(rhs.dim), 0.0);
    const double* m = y.data() + 2;
    for (const auto& term : rhs.terms) {
        if (term.q_pow > 0) continue;  // q = 0
        double v = term.coeff;
        if (term.f1 != rhs.dim) v *= m[term.f1];
        if (term.f2 != rhs.dim) v *= m[term.f2];
        sum[static_cast<size_t>(term.target)] += v;
        mag[static_cast<size_t>(term.target)] += std::abs(v);
    }
    for (int idx = 0; idx < rhs.dim; ++idx) {
        if (MomentLayout::key_at(idx).order() > interior) continue;
        const double rel = std::abs(sum[static_cast<size_t>(idx)]) /
                           std::max(mag[static_cast<size_t>(idx)], 1e-300);
        sol.residual = std::max(sol.residual, rel);
    }
    return sol;
}

ConvergenceStudy convergence_study(double E, double G02, double lambda, double hbar,
                                   const std::vector<int>& cutoffs) {
    if (cutoffs.size() < 2) throw std::invalid_argument("need at least two cutoffs");
    if (!std::is_sorted(cutoffs.begin(), cutoffs.end()))
        throw std::invalid_argument("cutoffs must be sorted ascending");

    ConvergenceStudy study;
    study.cutoffs = cutoffs;
    std::vector<StationarySolution> sols;
    sols.reserve(cutoffs.size());
    for (int n : cutoffs) sols.push_back(solve_quartic_stationary(E, G02, lambda, hbar, n));

    for (size_t i = 0; i + 1 < cutoffs.size(); ++i) {
        const MomentSet& lo = sols[i].state;
        const MomentSet& hi = sols[i + 1].state;
        ConvergencePair pair;
        pair.cutoff_lo = cutoffs[i];
        pair.cutoff_hi = cutoffs[i + 1];
        pair.max_rel_by_order.assign(static_cast<size_t>(cutoffs[i] - 1), 0.0);
        for (int ord = 2; ord <= cutoffs[i]; ++ord) {
            double worst = 0.0;
            for (int a = 0; a <= ord; ++a) {
                const double x = lo.get(a, ord - a);
                const double y = hi.get(a, ord - a);
                const double scale = std::max({std::abs(x), std::abs(y), 1e-300});
                if (x != y) worst = std::max(worst, std::abs(x - y) / scale);
            }
            pair.max_rel_by_order[static_cast<size_t>(ord - 2)] = worst;
        }
        int agree = 0;
        for (int ord = 2; ord <= cutoffs[i]; ord += 2) {
            if (pair.max_rel_by_order[static_cast<size_t>(ord - 2)] > 1e-10) break;
            agree = ord;
        }
        pair.agreement_order = agree;
        study.pairs.push_back(std::move(pair));
    }
    return study;
}

BoundsResult ground_energy_bounds(double lambda, double hbar, int max_inequality_order,
                                  int grid_points, double e_lo, double e_hi) {
    if (max_inequality_order != 4 && max_inequality_order != 6)
        throw std::invalid_argument("constraint suite order must be 4 or 6");
    if (lambda <= 0.0 || hbar <= 0.0)
        throw std::invalid_argument("bounds need lambda > 0 and hbar > 0");
    if (grid_points < 3) throw std::invalid_argument("grid needs at least 3 points");
    if (!(e_lo > 0.0 && e_hi > e_lo)) throw std::invalid_argument("bad scan window");

    const int half_order = max_inequality_order / 2;
    const int n_solve = 20;  // internal cutoff 24: converged far beyond order 6
    const double unit = std::cbrt(hbar * hbar * hbar * hbar * lambda);
    PairSuite suite(half_order, n_solve, hbar);

    const auto feasible = [&](double e_scaled) {
        const double E = e_scaled * unit;
        const double G02 = 3.0 * hbar * hbar / (16.0 * E);
        const StationarySolution sol = solve_quartic_stationary(E, G02, lambda, hbar, n_solve);
        return suite.feasibility_margin(sol.state) >= -1e-11;
    };

    BoundsResult out;
    out.order = max_inequality_order;
    out.grid = grid_points;
    out.grid_energies.resize(static_cast<size_t>(grid_points));
    out.grid_feasible.resize(static_cast<size_t>(grid_points));
    int first = -1, last = -1;
    for (int i = 0; i < grid_points; ++i) {
        const double e = e_lo + (e_hi - e_lo) * i / (grid_points - 1);
        const bool ok = feasible(e);
        out.grid_energies[static_cast<size_t>(i)] = e;
        out.grid_feasible[static_cast<size_t>(i)] = ok ? 1 : 0;
        if (ok) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0) throw std::runtime_error("empty feasible set on the scan grid");

    // bisect a feasibility edge; `hi_feasible` states which side of [lo, hi]
    // carries the feasible label targeted by the shrinking bracket
    const auto bisect = [&](double lo, double hi, bool want_feasible_hi) {
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (feasible(mid) == want_feasible_hi)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    };

    const auto& es = out.grid_energies;
    out.lower = first > 0 ? bisect(es[static_cast<size_t>(first - 1)],
                                   es[static_cast<size_t>(first)], true)
                          : es.front();
    out.upper = last < grid_points - 1 ? bisect(es[static_cast<size_t>(last)],
                                                es[static_cast<size_t>(last + 1)], false)
                                       : es.back();
    return out;
}

}  // namespace mhier
