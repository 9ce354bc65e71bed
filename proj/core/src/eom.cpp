#include "mhier/eom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "mhier/integrate.hpp"

namespace mhier {

using weyl::EOMTerm;
using weyl::MomentEOM;

namespace {

// accumulate exact terms keyed on (q_pow, hbar_pow, sorted factors)
struct Acc {
    std::map<std::tuple<int, int, std::vector<MomentKey>>, Rational> m;

    void add(Rational c, int q_pow, int hbar_pow, std::vector<MomentKey> factors) {
        if (c == 0) return;
        std::sort(factors.begin(), factors.end());
        auto key = std::tuple(q_pow, hbar_pow, std::move(factors));
        auto it = m.find(key);
        if (it == m.end())
            m.emplace(std::move(key), std::move(c));
        else {
            it->second += c;
            if (it->second == 0) m.erase(it);
        }
    }

    std::vector<EOMTerm> take() const {
        std::vector<EOMTerm> out;
        for (const auto& [key, c] : m) {
            EOMTerm t;
            t.coeff = c;
            t.q_pow = std::get<0>(key);
            t.hbar_pow = std::get<1>(key);
            t.factors = std::get<2>(key);
            out.push_back(std::move(t));
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

// order-0/1 identities: returns false if the factor kills the term,
// otherwise appends it unless it is the constant G^{0,0}
bool push_factor(std::vector<MomentKey>& factors, int a, int b, int n_max) {
    const int ord = a + b;
    if (ord == 1) return false;       // first central moment vanishes
    if (ord == 0) return true;        // G^{0,0} = 1
    if (ord > n_max) return false;    // truncation
    factors.push_back({a, b});
    return true;
}

}  // namespace

MomentEOM hand_moment_eom(int a, int b, const PolynomialPotential& V, Flavor flavor,
                          const TruncationPolicy& policy) {
    if (a < 0 || b < 0 || a + b < 2 || a + b > policy.n_max)
        throw std::invalid_argument("target moment must satisfy 2 <= a+b <= n_max");
    const int n_max = policy.n_max;
    const int deg = V.degree();
    Acc acc;

    // b G^{a+1,b-1}
    if (b >= 1) acc.add(Rational(b), 0, 0, {{a + 1, b - 1}});

    // a sum_n V^{(n)}(q)/(n-1)! [G^{0,n-1} G^{a-1,b} - G^{a-1,b+n-1}]
    if (a >= 1) {
        for (int n = 2; n <= deg; ++n) {
            for (int kk = n; kk <= deg; ++kk) {
                const Rational ck = rational_from_double(V.coeffs[static_cast<size_t>(kk)]);
                if (ck == 0) continue;
                // a * c_kk * kk!/(kk-n)! / (n-1)! q^(kk-n)
                const Rational base =
                    Rational(BigInt(a)) * ck * Rational(falling(kk, n), factorial(n - 1));
                std::vector<MomentKey> prod;
                if (push_factor(prod, 0, n - 1, n_max) && push_factor(prod, a - 1, b, n_max))
                    acc.add(base, kk - n, 0, std::move(prod));
                std::vector<MomentKey> lin;
                if (push_factor(lin, a - 1, b + n - 1, n_max))
                    acc.add(-base, kk - n, 0, std::move(lin));
            }
        }
    }

    // - sum_{n>=3} sum_{k=1}^{M} V^{(n)}(q)/(n-2k-1)! C(a,2k+1) (-hbar^2/4)^k
    //     G^{a-2k-1, b+n-2k-1}
    if (flavor == Flavor::Quantum) {
        for (int n = 3; n <= deg; ++n) {
            const int M = (std::min(a, n) - 1) / 2;
            for (int k = 1; k <= M; ++k) {
                const BigInt choose = binomial(a, 2 * k + 1);
                if (choose == 0) continue;
                for (int kk = n; kk <= deg; ++kk) {
                    const Rational ck =
                        rational_from_double(V.coeffs[static_cast<size_t>(kk)]);
                    if (ck == 0) continue;
                    Rational c = ck *
                                 Rational(falling(kk, n) * choose,
                                          factorial(n - 2 * k - 1) * (BigInt(1) << (2 * k)));
                    if (k % 2 == 0) c = -c;  // overall minus times (-1)^k
                    std::vector<MomentKey> f;
                    if (push_factor(f, a - 2 * k - 1, b + n - 2 * k - 1, n_max))
                        acc.add(c, kk - n, 2 * k, std::move(f));
                }
            }
        }
    }

    MomentEOM eom;
    eom.a = a;
    eom.b = b;
    eom.terms = acc.take();
    return eom;
}

std::vector<EOMTerm> hand_centroid_force(const PolynomialPotential& V, Flavor flavor,
                                         const TruncationPolicy& policy) {
    (void)flavor;  // eqp has no hbar line; classical form is identical
    const int deg = V.degree();
    Acc acc;
    // -V'(q)
    for (int kk = 1; kk <= deg; ++kk) {
        const Rational ck = rational_from_double(V.coeffs[static_cast<size_t>(kk)]);
        if (ck != 0) acc.add(-ck * Rational(kk), kk - 1, 0, {});
    }
    // - sum_{n=2}^{n_max} V^{(n+1)}(q) G^{0,n} / n!
    for (int n = 2; n <= std::min(deg - 1, policy.n_max); ++n) {
        for (int kk = n + 1; kk <= deg; ++kk) {
            const Rational ck = rational_from_double(V.coeffs[static_cast<size_t>(kk)]);
            if (ck == 0) continue;
            acc.add(-ck * Rational(falling(kk, n + 1), factorial(n)), kk - n - 1, 0,
                    {{0, n}});
        }
    }
    return acc.take();
}

std::vector<MomentEOM> hand_hierarchy(const PolynomialPotential& V, Flavor flavor,
                                      const TruncationPolicy& policy) {
    std::vector<MomentEOM> sys;
    const int dim = MomentLayout::count(policy.n_max);
    sys.reserve(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const MomentKey k = MomentLayout::key_at(i);
        sys.push_back(hand_moment_eom(k.a, k.b, V, flavor, policy));
    }
    return sys;
}

// --- compilation -------------------------------------------------------------

CompiledRHS compile_rhs_from(const std::vector<MomentEOM>& system,
                             const std::vector<EOMTerm>& force_terms,
                             const PolynomialPotential& V, Flavor flavor, double hbar,
                             const TruncationPolicy& policy) {
    if (flavor == Flavor::Classical && hbar != 0.0)
        throw std::invalid_argument("classical RHS requires hbar = 0");
    CompiledRHS c;
    c.V = V;
    c.flavor = flavor;
    c.hbar = hbar;
    c.policy = policy;
    c.dim = MomentLayout::count(policy.n_max);
    auto slot = [&](const std::vector<MomentKey>& f, size_t i) {
        return i < f.size() ? MomentLayout::index(f[i].a, f[i].b) : c.dim;
    };
    for (const auto& eq : system) {
        const int target = MomentLayout::index(eq.a, eq.b);
        for (const auto& t : eq.terms) {
            if (t.factors.size() > 2)
                throw std::logic_error("moment equations are at most quadratic");
            CompiledRHS::Term ct;
            ct.target = target;
            ct.coeff = to_double(t.coeff) * std::pow(hbar, t.hbar_pow);
            ct.q_pow = t.q_pow;
            ct.f1 = slot(t.factors, 0);
            ct.f2 = slot(t.factors, 1);
            if (ct.coeff == 0.0) continue;  // hbar = 0 kills the quantum line
            c.max_q_pow = std::max(c.max_q_pow, ct.q_pow);
            c.terms.push_back(ct);
        }
    }
    for (const auto& t : force_terms) {
        if (t.factors.size() > 1)
            throw std::logic_error("centroid force is linear in moments");
        CompiledRHS::ForceTerm ft;
        ft.coeff = to_double(t.coeff) * std::pow(hbar, t.hbar_pow);
        ft.q_pow = t.q_pow;
        ft.f = slot(t.factors, 0);
        if (ft.coeff == 0.0) continue;
        c.max_q_pow = std::max(c.max_q_pow, ft.q_pow);
        c.force.push_back(ft);
    }
    std::sort(c.terms.begin(), c.terms.end(),
              [](const CompiledRHS::Term& x, const CompiledRHS::Term& y) {
                  return x.target < y.target;
              });
    return c;
}

CompiledRHS compile_rhs(const PolynomialPotential& V, Flavor flavor, double hbar,
                        const TruncationPolicy& policy) {
    return compile_rhs_from(hand_hierarchy(V, flavor, policy),
                            hand_centroid_force(V, flavor, policy), V, flavor, hbar,
                            policy);
}

static constexpr int kMaxQPow = 32;

void CompiledRHS::eval(const double* y, double* dy) const {
    const double q = y[0];
    const double* m = y + 2;
    double qpow[kMaxQPow];
    qpow[0] = 1.0;
    for (int i = 1; i <= max_q_pow; ++i) qpow[i] = qpow[i - 1] * q;

    dy[0] = y[1];
    double f = 0.0;
    for (const auto& t : force) f += t.coeff * qpow[t.q_pow] * (t.f < dim ? m[t.f] : 1.0);
    dy[1] = f;

    std::fill(dy + 2, dy + 2 + dim, 0.0);
    for (const auto& t : terms) {
        const double v1 = t.f1 < dim ? m[t.f1] : 1.0;
        const double v2 = t.f2 < dim ? m[t.f2] : 1.0;
        dy[2 + t.target] += t.coeff * qpow[t.q_pow] * v1 * v2;
    }
}

double CompiledRHS::force_at(double q, const double* moments) const {
    double qpow[kMaxQPow];
    qpow[0] = 1.0;
    for (int i = 1; i <= max_q_pow; ++i) qpow[i] = qpow[i - 1] * q;
    double f = 0.0;
    for (const auto& t : force)
        f += t.coeff * qpow[t.q_pow] * (t.f < dim ? moments[t.f] : 1.0);
    return f;
}

double CompiledRHS::h_eff(const double* y) const {
    const double q = y[0], p = y[1];
    if (dim == 0) return 0.5 * p * p + V(q);  // centroid-only flow
    const double* m = y + 2;
    double h = 0.5 * p * p + V(q) + 0.5 * m[MomentLayout::index(2, 0)];
    double inv_fact = 1.0;  // becomes 1/n! in the loop
    const int cap = std::min(V.degree(), policy.n_max);
    for (int n = 2; n <= cap; ++n) {
        inv_fact /= n;
        h += V.derivative(n, q) * m[MomentLayout::index(0, n)] * inv_fact;
    }
    return h;
}

// --- spec'd conveniences -------------------------------------------------------

std::pair<double, double> rhs_centroid(const MomentSet& state, const PolynomialPotential& V,
                                       const TruncationPolicy& policy) {
    const double q = state.q;
    double dp = -V.derivative(1, q);
    double inv_fact = 1.0;
    const int cap = std::min(V.degree() - 1, std::min(policy.n_max, state.n_max));
    for (int n = 2; n <= cap; ++n) {
        inv_fact /= n;
        dp -= V.derivative(n + 1, q) * state.get(0, n) * inv_fact;
    }
    return {state.p, dp};
}

std::map<MomentKey, double> rhs_moments(const MomentSet& state, const CompiledRHS& compiled) {
    if (state.n_max != compiled.policy.n_max)
        throw std::invalid_argument("state and compiled RHS cutoffs differ");
    if (state.flavor != compiled.flavor)
        throw std::invalid_argument("state and compiled RHS flavors differ");
    std::vector<double> y(static_cast<size_t>(compiled.state_size()));
    y[0] = state.q;
    y[1] = state.p;
    std::copy(state.values.begin(), state.values.end(), y.begin() + 2);
    std::vector<double> dy(y.size());
    compiled.eval(y.data(), dy.data());
    std::map<MomentKey, double> out;
    for (int i = 0; i < compiled.dim; ++i)
        out[MomentLayout::key_at(i)] = dy[static_cast<size_t>(i) + 2];
    return out;
}

std::vector<double> corrected_newton_residual(const Trajectory& traj,
                                              const PolynomialPotential& V) {
    const size_t n = traj.times.size();
    if (n < 3) throw std::invalid_argument("need at least 3 samples for second differences");
    std::vector<double> res;
    res.reserve(n - 2);
    for (size_t i = 1; i + 1 < n; ++i) {
        const double dt_l = traj.times[i] - traj.times[i - 1];
        const double dt_r = traj.times[i + 1] - traj.times[i];
        const double q_l = traj.states[i - 1][0];
        const double q_c = traj.states[i][0];
        const double q_r = traj.states[i + 1][0];
        // second derivative on a (possibly slightly non-uniform) 3-point stencil
        const double d2q =
            2.0 * (dt_l * q_r - (dt_l + dt_r) * q_c + dt_r * q_l) / (dt_l * dt_r * (dt_l + dt_r));
        double sum = V.derivative(1, q_c);
        double inv_fact = 0.5;  // 1/2! entering the loop at n=3
        const int cap = std::min(V.degree(), traj.n_max + 1);
        for (int nn = 3; nn <= cap; ++nn) {
            inv_fact /= nn;
            sum += V.derivative(nn, q_c) * inv_fact *
                   traj.states[i][2 + static_cast<size_t>(MomentLayout::index(0, nn - 1))];
        }
        res.push_back(d2q + sum);
    }
    return res;
}

}  // namespace mhier
