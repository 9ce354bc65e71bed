#include "mhier/moments.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mhier/rational.hpp"

namespace mhier {

MomentSet gaussian_moments(double width2, double hbar, int n_max, double q0, double p0) {
    if (width2 <= 0.0) throw std::invalid_argument("gaussian width^2 must be positive");
    MomentSet s(Flavor::Quantum, hbar, n_max, q0, p0);
    const double vp = hbar * hbar / (2.0 * width2);  // momentum variance
    const double vq = width2 / 2.0;                  // position variance
    for (int a = 0; 2 * a <= n_max; ++a) {
        for (int b = 0; 2 * (a + b) <= n_max; ++b) {
            if (a + b < 1) continue;
            const double v = to_double(Rational(double_factorial(2 * a - 1) *
                                                double_factorial(2 * b - 1))) *
                             std::pow(vp, a) * std::pow(vq, b);
            s.set(2 * a, 2 * b, v);
        }
    }
    return s;
}

double effective_hamiltonian(const MomentSet& state, const PolynomialPotential& V) {
    double h = 0.5 * state.p * state.p + V(state.q) + 0.5 * state.get(2, 0);
    double inv_fact = 1.0;  // 1/n!
    const int top = std::min(V.degree(), state.n_max);
    for (int n = 2; n <= top; ++n) {
        inv_fact /= n;
        h += V.derivative(n, state.q) * state.get(0, n) * inv_fact;
    }
    return h;
}

double centroid_energy(const MomentSet& state, const PolynomialPotential& V) {
    return 0.5 * state.p * state.p + V(state.q);
}

std::string to_json(const MomentSet& state) {
    nlohmann::json j;
    j["flavor"] = flavor_name(state.flavor);
    j["hbar"] = state.hbar;
    j["n_max"] = state.n_max;
    j["q"] = state.q;
    j["p"] = state.p;
    nlohmann::json moms = nlohmann::json::array();
    for (int i = 0; i < state.size(); ++i) {
        const MomentKey k = MomentLayout::key_at(i);
        moms.push_back({{"a", k.a}, {"b", k.b}, {"value", state.values[static_cast<size_t>(i)]}});
    }
    j["moments"] = std::move(moms);
    return j.dump(2);
}

MomentSet moment_set_from_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    const std::string fl = j.at("flavor").get<std::string>();
    Flavor flavor;
    if (fl == "quantum")
        flavor = Flavor::Quantum;
    else if (fl == "classical")
        flavor = Flavor::Classical;
    else
        throw std::invalid_argument("flavor must be 'quantum' or 'classical'");
    MomentSet s(flavor, j.at("hbar").get<double>(), j.at("n_max").get<int>(),
                j.value("q", 0.0), j.value("p", 0.0));
    if (j.contains("moments")) {
        for (const auto& m : j.at("moments")) {
            s.set(m.at("a").get<int>(), m.at("b").get<int>(), m.at("value").get<double>());
        }
    }
    return s;
}

}  // namespace mhier
