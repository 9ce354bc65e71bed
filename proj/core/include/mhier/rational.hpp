#pragma once

// Exact-arithmetic layer used by the symbolic derivation and the closed-form
// stationary tables. Factorial coefficients at order ~30 overflow int128, so
// arbitrary precision is required; converted to double only at compile/eval
// time of the numeric right-hand sides.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <stdexcept>

namespace mhier {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline BigInt factorial(int n) {
    if (n < 0) throw std::invalid_argument("factorial of negative");
    BigInt f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// (2n-1)!! style double factorial; dfact(-1) = dfact(0) = 1
inline BigInt double_factorial(int n) {
    if (n <= 0) return 1;
    BigInt f = 1;
    for (int k = n; k > 1; k -= 2) f *= k;
    return f;
}

inline BigInt binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    BigInt num = 1, den = 1;
    for (int j = 1; j <= k; ++j) {
        num *= (n - j + 1);
        den *= j;
    }
    return num / den;
}

// falling factorial n (n-1) ... (n-k+1)
inline BigInt falling(int n, int k) {
    BigInt f = 1;
    for (int j = 0; j < k; ++j) f *= (n - j);
    return f;
}

// Exact conversion: every finite double is a dyadic rational.
inline Rational rational_from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite coefficient");
    if (x == 0.0) return Rational(0);
    int exp2 = 0;
    double m = std::frexp(x, &exp2);  // x = m * 2^exp2, 0.5 <= |m| < 1
    // 53 bits of mantissa
    long long im = static_cast<long long>(std::ldexp(m, 53));
    exp2 -= 53;
    Rational r(im);
    if (exp2 > 0)
        r *= Rational(BigInt(1) << exp2);
    else if (exp2 < 0)
        r /= Rational(BigInt(1) << (-exp2));
    return r;
}

}  // namespace mhier
