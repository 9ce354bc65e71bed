#include "mhier/oracle.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <future>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace mhier {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// counter-based sampling: an independent stream per sample index, so draws
// do not depend on evaluation order or thread count

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t ctr) {
    return static_cast<double>(mix64(seed + 0x9E3779B97F4A7C15ull * (ctr + 1)) >> 11) *
           0x1.0p-53;  // [0, 1)
}

// Box-Muller pair on the sample's own counters
void normal_pair(std::uint64_t seed, std::uint64_t sample, double& n1, double& n2) {
    const double u1 = 1.0 - uniform01(seed, 2 * sample);  // (0, 1]
    const double u2 = uniform01(seed, 2 * sample + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    n1 = r * std::cos(kTwoPi * u2);
    n2 = r * std::sin(kTwoPi * u2);
}

double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
    return acc;
}

size_t output_count(double t_end, double dt_out) {
    if (t_end <= 0.0) return 1;
    return static_cast<size_t>(std::floor(t_end / dt_out * (1.0 + 1e-12))) + 1;
}

// ---------------------------------------------------------------------------
// classical-orbit geometry used for automatic grid sizing

// smallest x >= start (on the side given by sgn) with V(sgn x) >= e;
// -1 when the level is never reached
double side_turn(const PolynomialPotential& V, double e, double sgn, double start) {
    double hi = std::max(start, 1e-9);
    if (V(sgn * hi) >= e) return hi;
    int guard = 0;
    while (V(sgn * hi) < e) {
        hi *= 2.0;
        if (++guard > 400) return -1.0;
    }
    double lo = hi / 2.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (V(sgn * mid) < e ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// period of the classical orbit through q0 at energy e: quadrature of
// 2 dx / sqrt(2(e - V)) with a sin substitution absorbing the inverse-
// square-root turning-point singularity; 0 when no bounded orbit is found
double orbit_period(const PolynomialPotential& V, double e, double q0) {
    const double xp = side_turn(V, e, +1.0, std::abs(q0));
    const double xm_mag = side_turn(V, e, -1.0, std::abs(q0));
    if (xp <= 0.0 || xm_mag <= 0.0) return 0.0;
    const double c = 0.5 * (xp - xm_mag), r = 0.5 * (xp + xm_mag);
    if (!(r > 0.0)) return 0.0;
    const int nn = 2048;
    double acc = 0.0;
    for (int i = 0; i < nn; ++i) {
        const double th = (-0.5 + (i + 0.5) / nn) * kPi;
        const double x = c + r * std::sin(th);
        acc += r * std::cos(th) / std::sqrt(std::max(2.0 * (e - V(x)), 1e-300));
    }
    return 2.0 * acc * (kPi / nn);
}

// ---------------------------------------------------------------------------
// FFTW wrapper: in-place 1d transforms on an owned buffer. Plan creation
// and destruction are not thread-safe, hence the global lock. Plans use
// FFTW_ESTIMATE so the butterfly schedule (and with it the rounding) does
// not depend on wisdom gathered at run time.

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

struct Fft1d {
    fftw_complex* a = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
    int n = 0;

    explicit Fft1d(int n_) : n(n_) {
        std::lock_guard<std::mutex> g(fftw_mutex());
        a = fftw_alloc_complex(static_cast<size_t>(n));
        fwd = fftw_plan_dft_1d(n, a, a, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(n, a, a, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!a || !fwd || !bwd) throw std::runtime_error("FFT plan allocation failed");
    }
    Fft1d(const Fft1d&) = delete;
    Fft1d& operator=(const Fft1d&) = delete;
    ~Fft1d() {
        std::lock_guard<std::mutex> g(fftw_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
        if (a) fftw_free(a);
    }

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(a); }
    void forward() { fftw_execute(fwd); }
    void backward() { fftw_execute(bwd); }
};

}  // namespace

// ---------------------------------------------------------------------------
// Monte-Carlo Liouville ensemble

EnsembleSpec matching_ensemble(const MomentSet& initial, std::size_t n, std::uint64_t seed) {
    if (initial.get(1, 1) != 0.0)
        throw std::invalid_argument("matching_ensemble requires an uncorrelated state (G^{1,1} = 0)");
    EnsembleSpec s;
    s.n = n;
    s.seed = seed;
    s.q0 = initial.q;
    s.p0 = initial.p;
    s.sigma_q = std::sqrt(initial.get(0, 2));
    s.sigma_p = std::sqrt(initial.get(2, 0));
    return s;
}

McResult liouville_mc(const EnsembleSpec& spec, const PolynomialPotential& V,
                      double t_end, double dt_out, double dt_max) {
    if (spec.n == 0) throw std::invalid_argument("ensemble needs at least one sample");
    if (spec.sigma_q < 0.0 || spec.sigma_p < 0.0)
        throw std::invalid_argument("ensemble widths must be non-negative");
    if (t_end < 0.0) throw std::invalid_argument("t_end must be non-negative");
    if (dt_out <= 0.0) dt_out = t_end > 0.0 ? t_end / 512.0 : 1.0;
    if (dt_max <= 0.0) dt_max = dt_out / 16.0;

    const size_t n = spec.n;
    const size_t n_out = output_count(t_end, dt_out);
    const int n_sub = std::max(1, static_cast<int>(std::ceil(dt_out / dt_max * (1.0 - 1e-12))));
    const double h = dt_out / n_sub;

    std::vector<double> dc;  // V' coefficients, force = -horner(dc, q)
    for (size_t k = 1; k < V.coeffs.size(); ++k)
        dc.push_back(static_cast<double>(k) * V.coeffs[k]);

    const int n_batch = static_cast<int>(std::min<size_t>(16, n));
    std::vector<size_t> edge(static_cast<size_t>(n_batch) + 1);
    for (int b = 0; b <= n_batch; ++b)
        edge[static_cast<size_t>(b)] = n * static_cast<size_t>(b) / static_cast<size_t>(n_batch);

    std::vector<double> qs(n), ps(n);
    {
        std::vector<std::future<void>> fs;
        for (int b = 0; b < n_batch; ++b)
            fs.push_back(std::async(std::launch::async, [&, b] {
                for (size_t i = edge[b]; i < edge[b + 1]; ++i) {
                    double g1, g2;
                    normal_pair(spec.seed, i, g1, g2);
                    qs[i] = spec.q0 + spec.sigma_q * g1;
                    ps[i] = spec.p0 + spec.sigma_p * g2;
                }
            }));
        for (auto& f : fs) f.get();
    }

    constexpr int kNm = 4;
    const int n_mom = MomentLayout::count(kNm);
    std::vector<MomentKey> keys(static_cast<size_t>(n_mom));
    for (int i = 0; i < n_mom; ++i) keys[static_cast<size_t>(i)] = MomentLayout::key_at(i);

    McResult out;
    out.batches = n_batch;
    out.traj.flavor = Flavor::Classical;
    out.traj.hbar = 0.0;
    out.traj.n_max = kNm;

    struct Lin {  // per-batch linear sums
        double q = 0, p = 0, e = 0;
    };
    struct Cen {  // per-batch central sums
        std::array<double, 12> c{};
    };

    const int n_cols = 2 + n_mom;
    for (size_t k = 0; k < n_out; ++k) {
        const double t = static_cast<double>(k) * dt_out;

        // pass 1: centroid and mean energy
        std::vector<std::future<Lin>> lf;
        for (int b = 0; b < n_batch; ++b)
            lf.push_back(std::async(std::launch::async, [&, b] {
                Lin s;
                for (size_t i = edge[b]; i < edge[b + 1]; ++i) {
                    s.q += qs[i];
                    s.p += ps[i];
                    s.e += 0.5 * ps[i] * ps[i] + V(qs[i]);
                }
                return s;
            }));
        std::vector<Lin> lin(static_cast<size_t>(n_batch));
        double sq = 0, sp = 0, se = 0;
        for (int b = 0; b < n_batch; ++b) {  // fixed reduction order
            lin[static_cast<size_t>(b)] = lf[static_cast<size_t>(b)].get();
            sq += lin[static_cast<size_t>(b)].q;
            sp += lin[static_cast<size_t>(b)].p;
            se += lin[static_cast<size_t>(b)].e;
        }
        const double mq = sq / static_cast<double>(n);
        const double mp = sp / static_cast<double>(n);
        const double me = se / static_cast<double>(n);

        // pass 2: central moments about the sample centroid
        std::vector<std::future<Cen>> cf;
        for (int b = 0; b < n_batch; ++b)
            cf.push_back(std::async(std::launch::async, [&, b] {
                Cen s;
                for (size_t i = edge[b]; i < edge[b + 1]; ++i) {
                    const double dq = qs[i] - mq, dp = ps[i] - mp;
                    double qp[5], pp[5];
                    qp[0] = pp[0] = 1.0;
                    for (int j = 1; j <= 4; ++j) {
                        qp[j] = qp[j - 1] * dq;
                        pp[j] = pp[j - 1] * dp;
                    }
                    for (int m = 0; m < 12; ++m)
                        s.c[static_cast<size_t>(m)] += pp[keys[static_cast<size_t>(m)].a] *
                                                       qp[keys[static_cast<size_t>(m)].b];
                }
                return s;
            }));
        std::vector<Cen> cen(static_cast<size_t>(n_batch));
        std::array<double, 12> sc{};
        for (int b = 0; b < n_batch; ++b) {
            cen[static_cast<size_t>(b)] = cf[static_cast<size_t>(b)].get();
            for (int m = 0; m < 12; ++m) sc[static_cast<size_t>(m)] += cen[static_cast<size_t>(b)].c[static_cast<size_t>(m)];
        }

        std::vector<double> row(static_cast<size_t>(n_cols));
        row[0] = mq;
        row[1] = mp;
        for (int m = 0; m < n_mom; ++m)
            row[static_cast<size_t>(2 + m)] = sc[static_cast<size_t>(m)] / static_cast<double>(n);

        // standard errors from the dispersion of batch means
        std::vector<double> err(static_cast<size_t>(n_cols), 0.0);
        double eh = 0.0;
        if (n_batch >= 2) {
            auto batch_sigma = [&](auto value_of) {
                double mean = 0.0;
                for (int b = 0; b < n_batch; ++b) mean += value_of(b);
                mean /= n_batch;
                double var = 0.0;
                for (int b = 0; b < n_batch; ++b) {
                    const double d = value_of(b) - mean;
                    var += d * d;
                }
                return std::sqrt(var / (static_cast<double>(n_batch) * (n_batch - 1)));
            };
            auto bsize = [&](int b) {
                return static_cast<double>(edge[static_cast<size_t>(b) + 1] - edge[static_cast<size_t>(b)]);
            };
            err[0] = batch_sigma([&](int b) { return lin[static_cast<size_t>(b)].q / bsize(b); });
            err[1] = batch_sigma([&](int b) { return lin[static_cast<size_t>(b)].p / bsize(b); });
            eh = batch_sigma([&](int b) { return lin[static_cast<size_t>(b)].e / bsize(b); });
            for (int m = 0; m < n_mom; ++m)
                err[static_cast<size_t>(2 + m)] = batch_sigma(
                    [&](int b) { return cen[static_cast<size_t>(b)].c[static_cast<size_t>(m)] / bsize(b); });
        }

        out.traj.times.push_back(t);
        out.traj.states.push_back(std::move(row));
        out.traj.h_eff.push_back(me);
        out.stderrs.push_back(std::move(err));
        out.h_stderr.push_back(eh);

        // advance the cloud to the next output time
        if (k + 1 < n_out) {
            std::vector<std::future<void>> af;
            for (int b = 0; b < n_batch; ++b)
                af.push_back(std::async(std::launch::async, [&, b] {
                    for (size_t i = edge[b]; i < edge[b + 1]; ++i) {
                        double q = qs[i], p = ps[i];
                        for (int s = 0; s < n_sub; ++s) {
                            const double k1q = p, k1p = -horner(dc, q);
                            const double k2q = p + 0.5 * h * k1p;
                            const double k2p = -horner(dc, q + 0.5 * h * k1q);
                            const double k3q = p + 0.5 * h * k2p;
                            const double k3p = -horner(dc, q + 0.5 * h * k2q);
                            const double k4q = p + h * k3p;
                            const double k4p = -horner(dc, q + h * k3q);
                            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
                            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                        }
                        qs[i] = q;
                        ps[i] = p;
                    }
                }));
            for (auto& f : af) f.get();
        }
    }

    out.traj.t_reached = out.traj.times.back();
    out.traj.truncated = false;
    return out;
}

// ---------------------------------------------------------------------------
// split-operator Schrodinger propagation

GridResult schrodinger_grid(const GridSpec& spec, const PolynomialPotential& V,
                            const GaussianPacket& psi0, double hbar, double t_end,
                            double dt_out) {
    if (hbar <= 0.0) throw std::invalid_argument("hbar must be positive");
    if (psi0.width2 <= 0.0) throw std::invalid_argument("packet width^2 must be positive");
    if (t_end < 0.0) throw std::invalid_argument("t_end must be non-negative");
    if (dt_out <= 0.0) dt_out = t_end > 0.0 ? t_end / 512.0 : 1.0;

    const double vq = psi0.width2 / 2.0;  // position variance
    const double width_q = std::sqrt(vq);
    const double sigma_p = hbar / std::sqrt(2.0 * psi0.width2);
    const MomentSet m0 = gaussian_moments(psi0.width2, hbar, 4, psi0.q0, psi0.p0);
    const double e0 = effective_hamiltonian(m0, V);
    const bool confining = V.degree() >= 2 && V.coeffs.back() > 0.0;

    // --- resolve the grid ---------------------------------------------------
    double L = spec.half_width;
    if (L <= 0.0) {
        double q_cover;
        if (confining) {
            const double xp = side_turn(V, e0, +1.0, std::max(std::abs(psi0.q0), width_q));
            const double xm = side_turn(V, e0, -1.0, std::max(std::abs(psi0.q0), width_q));
            if (xp <= 0.0 || xm <= 0.0)
                throw std::runtime_error("failed to bracket the classical turning points");
            q_cover = std::max(xp, xm) + 10.0 * width_q;
        } else {
            // ballistic cover for free/linear potentials
            const double c1 = V.degree() >= 1 ? V.coeffs[1] : 0.0;
            const double spread = std::sqrt(vq + t_end * t_end * sigma_p * sigma_p);
            q_cover = std::abs(psi0.q0) + (std::abs(psi0.p0) + 0.5 * std::abs(c1) * t_end) * t_end +
                      10.0 * spread;
        }
        L = 2.5 * q_cover;
    }

    double v_min = 0.0;
    for (int i = 0; i <= 4096; ++i) v_min = std::min(v_min, V(-L + 2.0 * L * i / 4096.0));
    double p_max;
    if (confining) {
        p_max = std::sqrt(2.0 * std::max(e0 - v_min, 0.0));
    } else {
        const double c1 = V.degree() >= 1 ? V.coeffs[1] : 0.0;
        p_max = std::abs(psi0.p0) + std::abs(c1) * t_end;
    }
    p_max = std::max(p_max, 6.0 * sigma_p);

    const double dx_req = std::min(width_q, hbar / p_max) / 8.0;
    int M = spec.points;
    if (M <= 0) {
        M = 4096;
        while (2.0 * L / M >= dx_req) {
            M *= 2;
            if (M > (1 << 24)) throw std::runtime_error("auto grid exceeds 2^24 points");
        }
    } else {
        if ((M & (M - 1)) != 0) throw std::invalid_argument("grid point count must be a power of two");
        if (2.0 * L / M >= dx_req)
            throw std::invalid_argument(
                "grid spacing does not resolve the packet width / de Broglie scale");
    }

    double dt = spec.dt;
    if (dt <= 0.0) {
        double t_char = 0.0;
        if (confining) t_char = orbit_period(V, e0, psi0.q0);
        if (t_char <= 0.0) t_char = t_end > 0.0 ? t_end : 1.0;
        dt = 1e-5 * t_char;
    }
    dt = std::min(dt, dt_out);

    const size_t n_out = output_count(t_end, dt_out);
    const int n_sub = std::max(1, static_cast<int>(std::ceil(dt_out / dt * (1.0 - 1e-12))));
    const double h = dt_out / n_sub;

    // --- precomputed tables ------------------------------------------------
    const double dx = 2.0 * L / M;
    std::vector<double> xs(static_cast<size_t>(M)), vxs(static_cast<size_t>(M)),
        pk(static_cast<size_t>(M));
    for (int j = 0; j < M; ++j) {
        xs[static_cast<size_t>(j)] = -L + j * dx;
        vxs[static_cast<size_t>(j)] = V(xs[static_cast<size_t>(j)]);
        const int jj = j < M / 2 ? j : j - M;
        pk[static_cast<size_t>(j)] = hbar * kTwoPi * jj / (M * dx);  // momentum grid
    }
    std::vector<std::complex<double>> half_v(static_cast<size_t>(M)), kprop(static_cast<size_t>(M));
    for (int j = 0; j < M; ++j) {
        half_v[static_cast<size_t>(j)] =
            std::exp(std::complex<double>(0.0, -vxs[static_cast<size_t>(j)] * h / (2.0 * hbar)));
        const double p = pk[static_cast<size_t>(j)];
        kprop[static_cast<size_t>(j)] =
            std::exp(std::complex<double>(0.0, -p * p * h / (2.0 * hbar))) / static_cast<double>(M);
    }

    Fft1d prop(M), work(M);
    std::complex<double>* psi = prop.data();
    {
        const double amp = std::pow(kTwoPi * vq, -0.25);
        double nrm = 0.0;
        for (int j = 0; j < M; ++j) {
            const double d = xs[static_cast<size_t>(j)] - psi0.q0;
            psi[j] = amp * std::exp(std::complex<double>(-d * d / (4.0 * vq), psi0.p0 * d / hbar));
            nrm += std::norm(psi[j]);
        }
        nrm = std::sqrt(nrm * dx);  // start from exactly unit discrete norm
        for (int j = 0; j < M; ++j) psi[j] /= nrm;
    }

    GridResult out;
    out.half_width = L;
    out.points = M;
    out.dt = h;
    out.traj.flavor = Flavor::Quantum;
    out.traj.hbar = hbar;
    out.traj.n_max = 4;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const int band = M / 16;  // boundary band: outer 1/16 of points per side

    for (size_t k = 0; k < n_out; ++k) {
        const double t = static_cast<double>(k) * dt_out;

        // --- observables ----------------------------------------------------
        double nrm = 0.0, bprob = 0.0, qbar = 0.0;
        for (int j = 0; j < M; ++j) {
            const double w = std::norm(psi[j]);
            nrm += w;
            if (j < band || j >= M - band) bprob += w;
            qbar += xs[static_cast<size_t>(j)] * w;
        }
        nrm *= dx;
        bprob *= dx;
        qbar = qbar * dx / nrm;

        out.max_norm_drift = std::max(out.max_norm_drift, std::abs(nrm - 1.0));
        out.max_boundary_prob = std::max(out.max_boundary_prob, bprob);
        if (std::abs(nrm - 1.0) > 1e-10 * std::max(1.0, t))
            throw std::runtime_error("grid propagation lost wavefunction norm");
        if (bprob >= 1e-12)
            throw std::runtime_error("wavefunction reached the grid boundary");

        double g0n[5] = {1.0, 0.0, 0.0, 0.0, 0.0};
        double pot = 0.0;
        for (int j = 0; j < M; ++j) {
            const double w = std::norm(psi[j]) * dx / nrm;
            const double d = xs[static_cast<size_t>(j)] - qbar;
            const double d2 = d * d;
            g0n[2] += d2 * w;
            g0n[3] += d2 * d * w;
            g0n[4] += d2 * d2 * w;
            pot += vxs[static_cast<size_t>(j)] * w;
        }

        std::complex<double>* ft = work.data();
        std::copy(psi, psi + M, ft);
        work.forward();
        double wsum = 0.0, pbar = 0.0;
        for (int j = 0; j < M; ++j) {
            const double w = std::norm(ft[j]);
            wsum += w;
            pbar += pk[static_cast<size_t>(j)] * w;
        }
        pbar /= wsum;
        double gm0[5] = {1.0, 0.0, 0.0, 0.0, 0.0};
        double kin = 0.0;
        for (int j = 0; j < M; ++j) {
            const double w = std::norm(ft[j]) / wsum;
            const double d = pk[static_cast<size_t>(j)] - pbar;
            const double d2 = d * d;
            gm0[2] += d2 * w;
            gm0[3] += d2 * d * w;
            gm0[4] += d2 * d2 * w;
            kin += 0.5 * pk[static_cast<size_t>(j)] * pk[static_cast<size_t>(j)] * w;
        }

        // G^{1,1}: real part of the centered cross-correlation <dq dp>
        for (int j = 0; j < M; ++j) ft[j] *= (pk[static_cast<size_t>(j)] - pbar);
        work.backward();  // ft = M * (p_op - pbar) psi
        double g11 = 0.0;
        for (int j = 0; j < M; ++j)
            g11 += (xs[static_cast<size_t>(j)] - qbar) *
                   (std::conj(psi[j]) * ft[j]).real() / static_cast<double>(M);
        g11 = g11 * dx / nrm;

        MomentSet row_m(Flavor::Quantum, hbar, 4, qbar, pbar);
        std::fill(row_m.values.begin(), row_m.values.end(), nan);
        row_m.set(0, 2, g0n[2]);
        row_m.set(0, 3, g0n[3]);
        row_m.set(0, 4, g0n[4]);
        row_m.set(2, 0, gm0[2]);
        row_m.set(3, 0, gm0[3]);
        row_m.set(4, 0, gm0[4]);
        row_m.set(1, 1, g11);

        std::vector<double> row;
        row.reserve(2 + row_m.values.size());
        row.push_back(qbar);
        row.push_back(pbar);
        row.insert(row.end(), row_m.values.begin(), row_m.values.end());

        out.traj.times.push_back(t);
        out.traj.states.push_back(std::move(row));
        out.traj.h_eff.push_back(kin + pot);

        // --- propagate to the next output time ------------------------------
        if (k + 1 < n_out) {
            for (int s = 0; s < n_sub; ++s) {
                for (int j = 0; j < M; ++j) psi[j] *= half_v[static_cast<size_t>(j)];
                prop.forward();
                for (int j = 0; j < M; ++j) psi[j] *= kprop[static_cast<size_t>(j)];
                prop.backward();
                for (int j = 0; j < M; ++j) psi[j] *= half_v[static_cast<size_t>(j)];
            }
        }
    }

    out.traj.t_reached = out.traj.times.back();
    out.traj.truncated = false;
    return out;
}

// ---------------------------------------------------------------------------
// finite-difference ground state

extern "C" void dstevr_(const char* jobz, const char* range, const int* n, double* d,
                        double* e, const double* vl, const double* vu, const int* il,
                        const int* iu, const double* abstol, int* m, double* w, double* z,
                        const int* ldz, int* isuppz, double* work, const int* lwork,
                        int* iwork, const int* liwork, int* info);

namespace {

struct FdGround {
    double energy = 0.0;
    std::vector<double> psi;  // normalized: sum psi^2 dx = 1
    double dx = 0.0;
};

// lowest eigenpair of -hbar^2/2 d2/dx2 + V on (-L, L) with n interior points
FdGround fd_ground(const PolynomialPotential& V, double hbar, double L, int n) {
    const double dx = 2.0 * L / (n + 1);
    const double kin = hbar * hbar / (dx * dx);
    std::vector<double> d(static_cast<size_t>(n)), e(static_cast<size_t>(n > 1 ? n - 1 : 1));
    for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] = kin + V(-L + (i + 1) * dx);
    std::fill(e.begin(), e.end(), -0.5 * kin);

    const int il = 1, iu = 1, ldz = n;
    const double vl = 0.0, vu = 0.0, abstol = 0.0;
    int m = 0, info = 0;
    std::vector<double> w(static_cast<size_t>(n)), z(static_cast<size_t>(n));
    std::vector<int> isuppz(2);
    const int lwork = 20 * n, liwork = 10 * n;
    std::vector<double> workbuf(static_cast<size_t>(lwork));
    std::vector<int> iwork(static_cast<size_t>(liwork));
    dstevr_("V", "I", &n, d.data(), e.data(), &vl, &vu, &il, &iu, &abstol, &m, w.data(),
            z.data(), &ldz, isuppz.data(), workbuf.data(), &lwork, iwork.data(), &liwork,
            &info);
    if (info != 0 || m < 1) throw std::runtime_error("ground-state eigensolve did not converge");

    FdGround g;
    g.energy = w[0];
    g.dx = dx;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += z[static_cast<size_t>(i)] * z[static_cast<size_t>(i)];
    s = std::sqrt(s * dx);
    g.psi.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g.psi[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] / s;
    return g;
}

struct GroundMoments {
    std::array<double, 9> pos{};
    std::array<double, 5> mom{};
};

GroundMoments eig_moments(const FdGround& g, double hbar, double L) {
    GroundMoments r;
    const int n = static_cast<int>(g.psi.size());
    const double dx = g.dx;

    double qbar = 0.0, nrm = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = g.psi[static_cast<size_t>(i)] * g.psi[static_cast<size_t>(i)] * dx;
        nrm += w;
        qbar += (-L + (i + 1) * dx) * w;
    }
    qbar /= nrm;
    for (int i = 0; i < n; ++i) {
        const double w = g.psi[static_cast<size_t>(i)] * g.psi[static_cast<size_t>(i)] * dx / nrm;
        const double d = (-L + (i + 1) * dx) - qbar;
        double dk = 1.0;
        for (int k = 0; k <= 8; ++k) {
            r.pos[static_cast<size_t>(k)] += dk * w;
            dk *= d;
        }
    }

    // momentum side: spectral transform of the (zero-padded) eigenvector
    int np = 1;
    while (np < 2 * (n + 2)) np <<= 1;
    Fft1d f(np);
    std::complex<double>* a = f.data();
    std::fill(a, a + np, std::complex<double>(0.0, 0.0));
    for (int i = 0; i < n; ++i) a[i] = g.psi[static_cast<size_t>(i)];
    f.forward();
    double wsum = 0.0, pbar = 0.0;
    std::vector<double> pgrid(static_cast<size_t>(np));
    for (int j = 0; j < np; ++j) {
        const int jj = j < np / 2 ? j : j - np;
        pgrid[static_cast<size_t>(j)] = hbar * kTwoPi * jj / (np * dx);
        const double w = std::norm(a[j]);
        wsum += w;
        pbar += pgrid[static_cast<size_t>(j)] * w;
    }
    pbar /= wsum;
    for (int j = 0; j < np; ++j) {
        const double w = std::norm(a[j]) / wsum;
        const double d = pgrid[static_cast<size_t>(j)] - pbar;
        double dk = 1.0;
        for (int k = 0; k <= 4; ++k) {
            r.mom[static_cast<size_t>(k)] += dk * w;
            dk *= d;
        }
    }
    return r;
}

}  // namespace

GroundStateResult ground_state_grid(const PolynomialPotential& V, double hbar,
                                    const GridSpec& spec) {
    if (hbar <= 0.0) throw std::invalid_argument("hbar must be positive");
    const int deg = V.degree();
    if (!((deg == 2 || deg == 4) && V.coeffs.back() > 0.0))
        throw std::invalid_argument(
            "ground-state grid needs a confining harmonic or quartic potential");

    double L = spec.half_width;
    if (L <= 0.0) {
        // box sized so the WKB tail of the ground state is negligible at the
        // wall; the quartic scale is (hbar^2/c4)^(1/6), the harmonic one
        // sqrt(hbar/omega)
        double l4 = 0.0, l2 = 0.0, lmin = 0.0;
        if (deg == 4) {
            l4 = 5.0 * std::pow(hbar * hbar / V.coeffs[4], 1.0 / 6.0);
            if (V.coeffs[2] < 0.0) lmin = 2.0 * std::sqrt(-V.coeffs[2] / (2.0 * V.coeffs[4]));
        }
        if (deg >= 2 && V.coeffs[2] > 0.0)
            l2 = 12.0 * std::sqrt(hbar / std::sqrt(2.0 * V.coeffs[2]));
        L = std::max(l2, l4) + lmin;
    }

    const int n_coarse = spec.points > 0 ? spec.points : 4096;
    if (n_coarse < 16) throw std::invalid_argument("ground-state grid too small");
    const int n_fine = 2 * n_coarse + 1;  // halves the spacing 2L/(n+1)

    const FdGround coarse = fd_ground(V, hbar, L, n_coarse);
    const FdGround fine = fd_ground(V, hbar, L, n_fine);
    const GroundMoments mc = eig_moments(coarse, hbar, L);
    const GroundMoments mf = eig_moments(fine, hbar, L);

    // second-order discretization: Richardson step removes the dx^2 term
    GroundStateResult r;
    r.energy = (4.0 * fine.energy - coarse.energy) / 3.0;
    r.energy_delta = std::abs(fine.energy - r.energy);
    for (size_t i = 0; i < r.position_moments.size(); ++i)
        r.position_moments[i] = (4.0 * mf.pos[i] - mc.pos[i]) / 3.0;
    for (size_t i = 0; i < r.momentum_moments.size(); ++i)
        r.momentum_moments[i] = (4.0 * mf.mom[i] - mc.mom[i]) / 3.0;
    r.points = n_fine;
    r.half_width = L;
    return r;
}

}  // namespace mhier
