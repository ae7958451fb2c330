#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "lamperti/errors.hpp"

namespace lamperti {

// Numerical inversion of a Laplace transform by the Euler method of Abate &
// Whitt: trapezoidal discretization of the Bromwich integral on the line
// Re s = a/t with a = m ln(10)/3, followed by Euler (binomial) summation of
// the alternating tail. The contour never leaves Re s > 0, which matters here:
// jump-measure transforms diverge left of the imaginary axis.
//
// Cost is 2m+1 transform evaluations per abscissa; accuracy for smooth bounded
// targets is limited by roundoff amplification ~ eps * 10^{m/3}, so m in the
// low thirties is the sweet spot in double precision.
class EulerInverter {
public:
    explicit EulerInverter(int m = 32) : m_(m) {
        if (m_ < 4 || m_ > 60) throw domain_error("EulerInverter: m out of range [4, 60]");
        // binomial weights 2^{-m} C(m, k)
        binom_.assign(static_cast<std::size_t>(m_) + 1, 0.0);
        binom_[0] = std::pow(2.0, -m_);
        for (int k = 1; k <= m_; ++k)
            binom_[static_cast<std::size_t>(k)] =
                binom_[static_cast<std::size_t>(k - 1)] * (m_ - k + 1) / static_cast<double>(k);
    }

    int order() const { return m_; }

    template <class F>
    double invert(F&& transform, double t) const {
        if (!(t > 0)) throw domain_error("EulerInverter: t must be > 0");
        const double a = m_ * std::log(10.0) / 3.0;
        const double pi_over_t = 3.141592653589793238462643383279502884 / t;
        std::vector<double> terms(static_cast<std::size_t>(2 * m_ + 1));
        for (int k = 0; k <= 2 * m_; ++k) {
            const std::complex<double> s(a / t, k * pi_over_t);
            const std::complex<double> v = transform(s);
            terms[static_cast<std::size_t>(k)] = (k % 2 == 0 ? 1.0 : -1.0) * v.real();
        }
        double partial = 0.5 * terms[0];
        for (int k = 1; k <= m_; ++k) partial += terms[static_cast<std::size_t>(k)];
        double acc = binom_[0] * partial;
        for (int k = 1; k <= m_; ++k) {
            partial += terms[static_cast<std::size_t>(m_ + k)];
            acc += binom_[static_cast<std::size_t>(k)] * partial;
        }
        return std::exp(a) / t * acc;
    }

private:
    int m_;
    std::vector<double> binom_;
};

}  // namespace lamperti
