#include "mhier/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mhier/rational.hpp"

namespace mhier {

MomentSet Trajectory::state_at(size_t i) const {
    if (n_max < 2) throw std::logic_error("point trajectory carries no moments");
    MomentSet s(flavor, hbar, n_max);
    const auto& y = states.at(i);
    s.q = y[0];
    s.p = y[1];
    std::copy(y.begin() + 2, y.end(), s.values.begin());
    return s;
}

std::vector<double> default_error_scales(const MomentSet& initial, double reference_hbar) {
    double href = reference_hbar > 0.0 ? reference_hbar
                                       : (initial.hbar > 0.0 ? initial.hbar : 1.0);
    std::vector<double> s(static_cast<size_t>(initial.size()) + 2);
    const double centroid =
        std::max({std::fabs(initial.q), std::fabs(initial.p), 1.0});
    s[0] = s[1] = centroid;
    for (int i = 0; i < initial.size(); ++i) {
        const MomentKey k = MomentLayout::key_at(i);
        const int ord = k.order();
        const double vac = double_factorial(ord - 1).convert_to<double>() *
                           std::pow(0.5 * href, 0.5 * ord);
        s[static_cast<size_t>(i) + 2] =
            std::max(vac, std::fabs(initial.values[static_cast<size_t>(i)]));
    }
    return s;
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// error weights b5 - b4
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output coefficients
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Stepper {
    const CompiledRHS* rhs = nullptr;
    size_t n = 0;
    std::vector<double> k1, k2, k3, k4, k5, k6, k7, ytmp, yerr;
    // dense-output polynomials for the last accepted step
    std::vector<double> r1, r2, r3, r4, r5;

    explicit Stepper(const CompiledRHS& f, size_t dim)
        : rhs(&f), n(dim), k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim),
          ytmp(dim), yerr(dim), r1(dim), r2(dim), r3(dim), r4(dim), r5(dim) {}

    void f(const double* y, double* dy) const { rhs->eval(y, dy); }

    // one trial step from (t, y) with size h; k1 must hold f(t, y);
    // on exit ynew holds the 5th-order result and yerr the error estimate
    void step(const std::vector<double>& y, double h, std::vector<double>& ynew) {
        for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(ytmp.data(), k2.data());
        for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(ytmp.data(), k3.data());
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(ytmp.data(), k4.data());
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(ytmp.data(), k5.data());
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        f(ytmp.data(), k6.data());
        for (size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                  a76 * k6[i]);
        f(ynew.data(), k7.data());
        for (size_t i = 0; i < n; ++i)
            yerr[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                           e7 * k7[i]);
    }

    void prepare_dense(const std::vector<double>& y, const std::vector<double>& ynew,
                       double h) {
        for (size_t i = 0; i < n; ++i) {
            const double dy = ynew[i] - y[i];
            const double bspl = h * k1[i] - dy;
            r1[i] = y[i];
            r2[i] = dy;
            r3[i] = bspl;
            r4[i] = dy - h * k7[i] - bspl;
            r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                         d7 * k7[i]);
        }
    }

    // theta in [0,1] across the last accepted step
    void interpolate(double theta, std::vector<double>& out) const {
        const double t1 = 1.0 - theta;
        for (size_t i = 0; i < n; ++i)
            out[i] = r1[i] +
                     theta * (r2[i] + t1 * (r3[i] + theta * (r4[i] + t1 * r5[i])));
    }
};

double error_norm(const std::vector<double>& yerr, const std::vector<double>& y0,
                  const std::vector<double>& y1, const std::vector<double>& atol_vec,
                  double rtol) {
    double acc = 0.0;
    for (size_t i = 0; i < yerr.size(); ++i) {
        const double sc =
            atol_vec[i] + rtol * std::max(std::fabs(y0[i]), std::fabs(y1[i]));
        const double r = sc > 0.0 ? yerr[i] / sc : 0.0;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(yerr.size()));
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double initial_step(const Stepper& st, const std::vector<double>& y0,
                    const std::vector<double>& f0, const std::vector<double>& atol_vec,
                    double rtol, double t_end) {
    const size_t n = y0.size();
    double d0 = 0.0, d1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double sc = atol_vec[i] + rtol * std::fabs(y0[i]);
        if (sc <= 0.0) continue;
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(n));
    d1 = std::sqrt(d1 / static_cast<double>(n));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end);

    std::vector<double> y1(n), f1(n);
    for (size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
    st.f(y1.data(), f1.data());
    double d2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double sc = atol_vec[i] + rtol * std::fabs(y0[i]);
        if (sc <= 0.0) continue;
        const double df = (f1[i] - f0[i]) / sc;
        d2 += df * df;
    }
    d2 = std::sqrt(d2 / static_cast<double>(n)) / h0;

    const double dm = std::max(d1, d2);
    double h1 = dm > 1e-15 ? std::pow(0.01 / dm, 0.2) : std::max(1e-6, h0 * 1e-3);
    return std::min({100.0 * h0, h1, t_end});
}

}  // namespace

Trajectory integrate_system(const CompiledRHS& rhs, const std::vector<double>& y0,
                            double t_end, const IntegrateOptions& opt) {
    if (t_end <= 0.0) throw std::invalid_argument("t_end must be positive");
    if (opt.rtol <= 0.0 || opt.atol <= 0.0)
        throw std::invalid_argument("tolerances must be positive");
    const size_t n = y0.size();
    if (n != static_cast<size_t>(rhs.state_size()))
        throw std::invalid_argument("state size does not match compiled RHS");

    std::vector<double> atol_vec(n, opt.atol);
    if (!opt.scales.empty()) {
        if (opt.scales.size() != n)
            throw std::invalid_argument("scales size does not match state");
        for (size_t i = 0; i < n; ++i) atol_vec[i] = opt.atol * opt.scales[i];
    }

    Trajectory traj;
    traj.flavor = rhs.flavor;
    traj.hbar = rhs.hbar;
    traj.n_max = rhs.dim > 0 ? rhs.policy.n_max : 1;

    const double dt_out = opt.dt_out > 0.0 ? opt.dt_out : t_end / 512.0;
    const size_t n_out = static_cast<size_t>(std::floor(t_end / dt_out * (1.0 + 1e-12))) + 1;

    Stepper st(rhs, n);
    std::vector<double> y = y0, ynew(n), ysample(n);

    auto emit = [&](double ts, const std::vector<double>& ys) {
        traj.times.push_back(ts);
        traj.states.push_back(ys);
        traj.h_eff.push_back(rhs.h_eff(ys.data()));
    };

    double t = 0.0;
    emit(0.0, y);
    size_t next_out = 1;

    st.f(y.data(), st.k1.data());
    if (!all_finite(st.k1) || !all_finite(y))
        throw std::invalid_argument("non-finite initial data");

    double h = initial_step(st, y, st.k1, atol_vec, opt.rtol, t_end);
    const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    const double facc1 = 5.0, facc2 = 0.1;  // max shrink / growth of 1/fac
    double facold = 1e-4;
    bool failed = false;

    size_t steps = 0;
    while (t < t_end && next_out < n_out) {
        if (++steps > opt.max_steps) {
            failed = true;
            break;
        }
        const double hmin = 16.0 * std::numeric_limits<double>::epsilon() *
                            std::max(1.0, std::fabs(t));
        if (h < hmin) {
            failed = true;  // step-size underflow: hierarchy blow-up
            break;
        }
        if (t + h > t_end) h = t_end - t;

        st.step(y, h, ynew);
        double err = all_finite(ynew) && all_finite(st.yerr)
                         ? error_norm(st.yerr, y, ynew, atol_vec, opt.rtol)
                         : std::numeric_limits<double>::infinity();

        if (!std::isfinite(err)) {
            h *= 0.25;
            continue;
        }
        const double fac11 = std::pow(err, expo1);
        if (err <= 1.0) {
            // accepted
            facold = std::max(err, 1e-4);
            st.prepare_dense(y, ynew, h);
            const double t_new = t + h;
            while (next_out < n_out) {
                const double ts = static_cast<double>(next_out) * dt_out;
                if (ts > t_new * (1.0 + 1e-14)) break;
                st.interpolate((ts - t) / h, ysample);
                emit(ts, ysample);
                ++next_out;
            }
            t = t_new;
            std::swap(y, ynew);
            std::swap(st.k1, st.k7);  // FSAL
            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            h = h / fac;
        } else {
            h = h / std::min(facc1, fac11 / safe);
        }
    }

    traj.t_reached = t;
    traj.truncated = failed;
    return traj;
}

Trajectory integrate(const MomentSet& initial, const PolynomialPotential& V,
                     const TruncationPolicy& policy, double t_end,
                     const IntegrateOptions& opt) {
    initial.validate_shape();
    if (initial.n_max != policy.n_max)
        throw std::invalid_argument("initial state cutoff differs from policy");
    const CompiledRHS rhs = compile_rhs(V, initial.flavor, initial.hbar, policy);
    std::vector<double> y0(static_cast<size_t>(rhs.state_size()));
    y0[0] = initial.q;
    y0[1] = initial.p;
    std::copy(initial.values.begin(), initial.values.end(), y0.begin() + 2);
    IntegrateOptions o = opt;
    if (o.scales.empty()) o.scales = default_error_scales(initial);
    return integrate_system(rhs, y0, t_end, o);
}

Trajectory integrate_point(double q0, double p0, const PolynomialPotential& V, double t_end,
                           const IntegrateOptions& opt) {
    // centroid-only compiled system: dim = 0, force keeps only the -V' part
    CompiledRHS rhs;
    rhs.V = V;
    rhs.flavor = Flavor::Classical;
    rhs.hbar = 0.0;
    rhs.policy = TruncationPolicy{2};
    rhs.dim = 0;
    const int deg = V.degree();
    for (int kk = 1; kk <= deg; ++kk) {
        const double c = V.coeffs[static_cast<size_t>(kk)];
        if (c == 0.0) continue;
        rhs.force.push_back({-c * kk, kk - 1, 0});
        rhs.max_q_pow = std::max(rhs.max_q_pow, kk - 1);
    }
    IntegrateOptions o = opt;
    if (o.scales.empty())
        o.scales = {std::max({std::fabs(q0), std::fabs(p0), 1.0}),
                    std::max({std::fabs(q0), std::fabs(p0), 1.0})};
    std::vector<double> y0 = {q0, p0};
    Trajectory traj = integrate_system(rhs, y0, t_end, o);
    traj.n_max = 1;
    return traj;
}

namespace {

// zero crossings of q(t) with the given sign direction, each refined by a
// parabola through the three surrounding samples
std::vector<double> q_zero_crossings(const Trajectory& traj, bool upward) {
    const size_t n = traj.size();
    std::vector<double> crossings;
    for (size_t i = 1; i + 1 < n; ++i) {
        const double q0 = traj.states[i][0], q1 = traj.states[i + 1][0];
        if (upward ? !(q0 < 0.0 && q1 >= 0.0) : !(q0 > 0.0 && q1 <= 0.0)) continue;
        // parabola through (t_{i-1},q_{i-1}), (t_i,q_i), (t_{i+1},q_{i+1})
        const double tl = traj.times[i - 1], tc = traj.times[i], tr = traj.times[i + 1];
        const double ql = traj.states[i - 1][0], qc = q0, qr = q1;
        const double h1 = tc - tl, h2 = tr - tc;
        const double dd = ((qr - qc) / h2 - (qc - ql) / h1) / (h1 + h2);  // f''/2
        const double sl =
            ((qr - qc) * h1 / h2 + (qc - ql) * h2 / h1) / (h1 + h2);  // f'(tc)
        double root;
        if (std::fabs(dd) < 1e-300) {
            root = tc - qc / sl;
        } else {
            const double disc = sl * sl - 4.0 * dd * qc;
            if (disc < 0.0) {
                root = tc - qc / sl;
            } else {
                const double r1 = tc + (-sl + std::sqrt(disc)) / (2.0 * dd);
                const double r2 = tc + (-sl - std::sqrt(disc)) / (2.0 * dd);
                // pick the root inside the bracketing window around tc
                root = (r1 >= tc - h1 && r1 <= tr) ? r1 : r2;
            }
        }
        crossings.push_back(root);
    }
    return crossings;
}

}  // namespace

double estimate_period(const Trajectory& traj) {
    // Same-direction crossings are spaced one full period apart regardless of
    // any asymmetry of the orbit, so either direction alone suffices.  Upward
    // is tried first; a run that starts exactly at an upward crossing (q=0,
    // p>0) may see too few interior upward crossings, in which case the
    // downward ones (shifted by roughly half a period) fill in.
    std::vector<double> crossings = q_zero_crossings(traj, true);
    if (crossings.size() < 2) crossings = q_zero_crossings(traj, false);
    if (crossings.size() < 2) return 0.0;
    return (crossings.back() - crossings.front()) /
           static_cast<double>(crossings.size() - 1);
}

}  // namespace mhier
