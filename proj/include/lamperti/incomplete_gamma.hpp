#pragma once

#include <cmath>
#include <complex>

#include "lamperti/errors.hpp"

namespace lamperti {

// Upper incomplete gamma Gamma(q, z) for real non-integer q < 1 and complex z
// with Re z > 0. Series through the lower function for small |z| (Tricomi
// form, stable for non-integer q), Lentz continued fraction otherwise.
// Used for the power-tail jump transform int_eps^inf e^{-wx} x^{-1-a} dx
// = w^a Gamma(-a, eps w).
inline std::complex<double> upper_gamma(double q, std::complex<double> z) {
    if (!(z.real() > 0.0)) throw domain_error("upper_gamma: Re z must be > 0");
    if (std::abs(z) < 8.0) {
        // gamma(q,z) = z^q e^{-z} sum_n z^n / (q (q+1) ... (q+n))
        std::complex<double> term = 1.0 / q;
        std::complex<double> sum = term;
        for (int n = 1; n < 600; ++n) {
            term *= z / (q + static_cast<double>(n));
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return std::tgamma(q) - std::pow(z, q) * std::exp(-z) * sum;
    }
    // Gamma(q,z) = e^{-z} z^q / (z + 1 - q - 1(1-q)/(z + 3 - q - 2(2-q)/(...)))
    const double tiny = 1e-300;
    std::complex<double> b = z + 1.0 - q;
    std::complex<double> c = 1.0 / tiny;
    std::complex<double> d = 1.0 / b;
    std::complex<double> h = d;
    for (int i = 1; i < 400; ++i) {
        const double an = -i * (static_cast<double>(i) - q);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const std::complex<double> delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-z) * std::pow(z, q) * h;
}

}  // namespace lamperti
