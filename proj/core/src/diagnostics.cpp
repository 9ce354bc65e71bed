#include "mhier/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mhier/io.hpp"

namespace mhier {
namespace {

constexpr double kGuard = 1e-30;  // delta1^2 below this leaves gamma undefined

// int_0^1 du / sqrt(1 - u^4): quarter-period shape integral of the pure
// quartic orbit
constexpr double kQuarticShapeIntegral = 1.3110287771461;

void check_aligned(const std::vector<double>& ta, const std::vector<double>& tb, size_t n) {
    for (size_t k = 0; k < n; ++k)
        if (std::abs(ta[k] - tb[k]) > 1e-9 * std::max(1.0, std::abs(ta[k])))
            throw std::invalid_argument("output grids differ between runs");
}

/// unsigned dephasing between two near-periodic series: argmax of |rho(l)|
// where rho is the Pearson correlation over the overlap at sample lag l.
// The absolute value matches patterns that agree up to overall sign (a
// quarter-period shift can align a waveform with either +/- its partner).
// The discrete peak is parabola-refined and folded to [0, period/2].
double xcorr_lag(const std::vector<double>& a, const std::vector<double>& b, double dt,
                 double period) {
    const size_t n = a.size();
    if (n < 4 || dt <= 0.0 || period <= 0.0) return 0.0;
    const size_t lmax = std::min(n - 2, static_cast<size_t>(std::floor(period / dt)));
    std::vector<double> rho(lmax + 1, 0.0);
    for (size_t l = 0; l <= lmax; ++l) {
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (size_t k = 0; k + l < n; ++k) {
            sab += a[k] * b[k + l];
            saa += a[k] * a[k];
            sbb += b[k + l] * b[k + l];
        }
        const double den = std::sqrt(saa * sbb);
        rho[l] = den > 0.0 ? std::abs(sab) / den : 0.0;
    }
    size_t best_l = 0;
    for (size_t l = 1; l <= lmax; ++l)
        if (rho[l] > rho[best_l]) best_l = l;
    double lag = static_cast<double>(best_l);
    if (best_l > 0 && best_l < lmax) {
        const double den = rho[best_l - 1] - 2.0 * rho[best_l] + rho[best_l + 1];
        if (std::abs(den) > 1e-300) {
            const double shift = 0.5 * (rho[best_l - 1] - rho[best_l + 1]) / den;
            if (std::abs(shift) <= 1.0) lag += shift;
        }
    }
    lag *= dt;
    return std::min(lag, std::max(0.0, period - lag));
}

// turning points with prominence above prom_frac of the series range
int count_extrema(const std::vector<double>& s, double prom_frac) {
    if (s.size() < 3) return 0;
    const auto [mn_it, mx_it] = std::minmax_element(s.begin(), s.end());
    const double prom = (*mx_it - *mn_it) * prom_frac;
    if (!(prom > 0.0)) return 0;
    int count = 0, dir = 0;
    double hi = s[0], lo = s[0], ref = s[0];
    for (size_t k = 1; k < s.size(); ++k) {
        const double v = s[k];
        if (dir == 0) {
            hi = std::max(hi, v);
            lo = std::min(lo, v);
            if (hi - v > prom) {
                dir = -1;
                ref = v;
            } else if (v - lo > prom) {
                dir = +1;
                ref = v;
            }
        } else if (dir > 0) {
            ref = std::max(ref, v);
            if (ref - v > prom) {
                ++count;
                dir = -1;
                ref = v;
            }
        } else {
            ref = std::min(ref, v);
            if (v - ref > prom) {
                ++count;
                dir = +1;
                ref = v;
            }
        }
    }
    return count;
}

}  // namespace

ComparisonSet align_comparison(const Trajectory& point, const Trajectory& classical,
                               const Trajectory& quantum) {
    const size_t n = std::min({point.size(), classical.size(), quantum.size()});
    if (n == 0) throw std::invalid_argument("empty trajectory in comparison");
    check_aligned(point.times, classical.times, n);
    check_aligned(point.times, quantum.times, n);

    ComparisonSet cmp;
    cmp.times.assign(point.times.begin(), point.times.begin() + static_cast<long>(n));
    cmp.q_class.resize(n);
    cmp.p_class.resize(n);
    cmp.q_c.resize(n);
    cmp.p_c.resize(n);
    cmp.q_q.resize(n);
    cmp.p_q.resize(n);
    for (size_t k = 0; k < n; ++k) {
        cmp.q_class[k] = point.states[k][0];
        cmp.p_class[k] = point.states[k][1];
        cmp.q_c[k] = classical.states[k][0];
        cmp.p_c[k] = classical.states[k][1];
        cmp.q_q[k] = quantum.states[k][0];
        cmp.p_q[k] = quantum.states[k][1];
    }
    cmp.period = estimate_period(point);
    return cmp;
}

ComparisonSet compare_runs(const MomentSet& initial, const PolynomialPotential& V,
                           const TruncationPolicy& policy, double t_end,
                           const IntegrateOptions& opt) {
    if (initial.flavor != Flavor::Quantum)
        throw std::invalid_argument("comparison runs start from a quantum state");
    IntegrateOptions o = opt;
    if (o.dt_out <= 0.0) o.dt_out = t_end / 512.0;

    const Trajectory quantum = integrate(initial, V, policy, t_end, o);

    const MomentSet twin = initial.as_classical();
    IntegrateOptions oc = o;
    if (oc.scales.empty()) oc.scales = default_error_scales(twin, initial.hbar);
    const Trajectory classical = integrate(twin, V, policy, t_end, oc);

    IntegrateOptions op = o;
    op.scales.clear();
    const Trajectory point = integrate_point(initial.q, initial.p, V, t_end, op);

    return align_comparison(point, classical, quantum);
}

std::vector<double> delta_n(const Trajectory& a, const Trajectory& b) {
    const size_t n = std::min(a.size(), b.size());
    if (n == 0) throw std::invalid_argument("empty trajectory in delta_n");
    check_aligned(a.times, b.times, n);
    std::vector<double> out(n);
    for (size_t k = 0; k < n; ++k) {
        const double dq = a.states[k][0] - b.states[k][0];
        const double dp = a.states[k][1] - b.states[k][1];
        out[k] = dq * dq + dp * dp;
    }
    return out;
}

Decomposition decompose(const ComparisonSet& cmp) {
    const size_t n = cmp.times.size();
    Decomposition d;
    d.period = cmp.period;
    d.t_over_T.resize(n);
    d.delta1_q.resize(n);
    d.delta2_q.resize(n);
    d.delta1_p.resize(n);
    d.delta2_p.resize(n);
    d.delta1_sq.resize(n);
    d.delta2_sq.resize(n);
    d.gamma_running.resize(n);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double run1 = 0.0, run2 = 0.0;
    for (size_t k = 0; k < n; ++k) {
        d.t_over_T[k] = cmp.period > 0.0 ? cmp.times[k] / cmp.period : cmp.times[k];
        d.delta1_q[k] = cmp.q_c[k] - cmp.q_class[k];
        d.delta2_q[k] = cmp.q_q[k] - cmp.q_c[k];
        d.delta1_p[k] = cmp.p_c[k] - cmp.p_class[k];
        d.delta2_p[k] = cmp.p_q[k] - cmp.p_c[k];
        d.delta1_sq[k] = d.delta1_q[k] * d.delta1_q[k] + d.delta1_p[k] * d.delta1_p[k];
        d.delta2_sq[k] = d.delta2_q[k] * d.delta2_q[k] + d.delta2_p[k] * d.delta2_p[k];
        run1 = std::max(run1, d.delta1_sq[k]);
        run2 = std::max(run2, d.delta2_sq[k]);
        d.gamma_running[k] = run1 < kGuard ? nan : run2 / run1;
    }

    // gamma proper: windowed maxima over the final simulated period
    const double t_end = cmp.times.back();
    const double t0 = cmp.period > 0.0 ? std::max(0.0, t_end - cmp.period) : 0.0;
    double max1 = 0.0, max2 = 0.0;
    for (size_t k = 0; k < n; ++k) {
        if (cmp.times[k] < t0 - 1e-12) continue;
        max1 = std::max(max1, d.delta1_sq[k]);
        max2 = std::max(max2, d.delta2_sq[k]);
    }
    if (max1 >= kGuard) {
        d.gamma = max2 / max1;
        d.gamma_defined = true;
    } else {
        d.gamma = nan;
        d.gamma_defined = false;
    }
    return d;
}

std::string decomposition_csv_rows(const Decomposition& d) {
    std::string out;
    for (size_t k = 0; k < d.t_over_T.size(); ++k) {
        out += format_g17(d.t_over_T[k]);
        out += ',';
        out += format_g17(d.delta1_q[k]);
        out += ',';
        out += format_g17(d.delta2_q[k]);
        out += ',';
        out += format_g17(d.delta1_p[k]);
        out += ',';
        out += format_g17(d.delta2_p[k]);
        out += ',';
        out += format_g17(d.delta1_sq[k]);
        out += ',';
        out += format_g17(d.delta2_sq[k]);
        out += ',';
        out += format_g17(d.gamma_running[k]);
        out += '\n';
    }
    return out;
}

OrbitReferences orbit_references(double e_class, double lambda) {
    if (e_class <= 0.0 || lambda <= 0.0)
        throw std::invalid_argument("orbit references need positive energy and coupling");
    OrbitReferences r;
    r.q_max = std::pow(e_class / lambda, 0.25);
    r.p_max_sq = 2.0 * e_class;
    // maximize p^2 + q^2 = 2E - 2 lambda u^2 + u over u = q^2 in [0, q_max^2];
    // the interior stationary point sits at u = 1/(4 lambda)
    const double u_star = 1.0 / (4.0 * lambda);
    const double u_max = std::sqrt(e_class / lambda);
    if (u_star <= u_max) {
        r.r2_max = 2.0 * e_class + 1.0 / (8.0 * lambda);
        r.interior_critical_point = true;
    } else {
        r.r2_max = std::max(2.0 * e_class, u_max);
        r.interior_critical_point = false;
    }
    return r;
}

double quartic_period(double e_class, double lambda) {
    if (e_class <= 0.0 || lambda <= 0.0)
        throw std::invalid_argument("quartic period needs positive energy and coupling");
    return 4.0 * std::pow(e_class / lambda, 0.25) * kQuarticShapeIntegral /
           std::sqrt(2.0 * e_class);
}

PhaseStructure phase_structure(const ComparisonSet& cmp) {
    const size_t n = cmp.times.size();
    if (n < 8) throw std::invalid_argument("too few samples for phase structure");
    if (!(cmp.period > 0.0)) throw std::invalid_argument("period not resolved by the point run");
    const double t_end = cmp.times.back();
    if (t_end < 2.0 * cmp.period * (1.0 - 1e-9))
        throw std::invalid_argument("phase structure needs at least two periods of data");

    const Decomposition d = decompose(cmp);
    const double dt = cmp.times[1] - cmp.times[0];

    PhaseStructure ps;
    ps.period = cmp.period;
    ps.lag_q = xcorr_lag(d.delta1_q, d.delta2_q, dt, cmp.period);
    ps.lag_p = xcorr_lag(d.delta1_p, d.delta2_p, dt, cmp.period);
    ps.lag_q_over_T = ps.lag_q / cmp.period;
    ps.lag_p_over_T = ps.lag_p / cmp.period;

    // turning points over the final full period, halved per half-cycle
    size_t k0 = 0;
    while (k0 < n && cmp.times[k0] < t_end - cmp.period - 1e-12) ++k0;
    const std::vector<double> wq(d.delta1_q.begin() + static_cast<long>(k0), d.delta1_q.end());
    const std::vector<double> wp(d.delta1_p.begin() + static_cast<long>(k0), d.delta1_p.end());
    ps.critical_points_q = static_cast<int>(std::llround(count_extrema(wq, 0.02) / 2.0));
    ps.critical_points_p = static_cast<int>(std::llround(count_extrema(wp, 0.02) / 2.0));

    // simultaneous zero of all four deltas after the transient quarter period
    double m1q = 0, m2q = 0, m1p = 0, m2p = 0;
    for (size_t k = 0; k < n; ++k) {
        m1q = std::max(m1q, std::abs(d.delta1_q[k]));
        m2q = std::max(m2q, std::abs(d.delta2_q[k]));
        m1p = std::max(m1p, std::abs(d.delta1_p[k]));
        m2p = std::max(m2p, std::abs(d.delta2_p[k]));
    }
    ps.common_zero = false;
    for (size_t k = 0; k < n; ++k) {
        if (cmp.times[k] < 0.25 * cmp.period) continue;
        if (std::abs(d.delta1_q[k]) < 1e-5 * m1q && std::abs(d.delta2_q[k]) < 1e-5 * m2q &&
            std::abs(d.delta1_p[k]) < 1e-5 * m1p && std::abs(d.delta2_p[k]) < 1e-5 * m2p) {
            ps.common_zero = true;
            break;
        }
    }
    return ps;
}

}  // namespace mhier
