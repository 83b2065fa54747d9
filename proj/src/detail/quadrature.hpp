#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace snclt::detail {

inline constexpr double kQuadratureTolerance = 1e-12;
inline constexpr unsigned kQuadratureDepth = 10;

/// Adaptive Gauss-Kronrod integral of f over [a, b]; b may be +inf.
template <class F>
double integrate(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double error = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, a, b, kQuadratureDepth, kQuadratureTolerance, &error);
}

/// Same as integrate, but splits [a, b] at the given interior breakpoints so that
/// piecewise-smooth integrands (step CDFs of discrete laws) are integrated exactly.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::vector<double> breaks) {
    if (!(b > a)) return 0.0;
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    double lo = a;
    for (double x : breaks) {
        if (x <= lo || x >= b) continue;
        total += integrate(f, lo, x);
        lo = x;
    }
    return total + integrate(f, lo, b);
}

}  // namespace snclt::detail
