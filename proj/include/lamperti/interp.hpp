#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lamperti/errors.hpp"

namespace lamperti {

// Monotonicity-preserving cubic Hermite interpolant (Fritsch-Carlson slopes)
// on a uniform grid. Used for cached scale-function values, which must stay
// monotone regardless of inversion noise at the 1e-10 level.
class UniformCubic {
public:
    UniformCubic() = default;
    UniformCubic(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y)) {
        const std::size_t n = y_.size();
        if (n < 2 || h_ <= 0.0) throw domain_error("UniformCubic: need >=2 nodes, h>0");
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / h_;
        m_.assign(n, 0.0);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = 0.5 * (d[i - 1] + d[i]);
        // Fritsch-Carlson limiter
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = m_[i + 1] = 0.0;
            } else {
                const double a = m_[i] / d[i];
                const double b = m_[i + 1] / d[i];
                const double s = a * a + b * b;
                if (s > 9.0) {
                    const double t = 3.0 / std::sqrt(s);
                    m_[i] = t * a * d[i];
                    m_[i + 1] = t * b * d[i];
                }
            }
        }
    }

    double lo() const { return x0_; }
    double hi() const { return x0_ + h_ * static_cast<double>(y_.size() - 1); }
    const std::vector<double>& nodes() const { return y_; }
    double step() const { return h_; }

    double operator()(double x) const {
        const std::size_t n = y_.size();
        if (x <= x0_) return y_.front();
        double u = (x - x0_) / h_;
        auto i = static_cast<std::size_t>(u);
        if (i >= n - 1) return y_.back();
        const double t = u - static_cast<double>(i);
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        return h00 * y_[i] + h10 * h_ * m_[i] + h01 * y_[i + 1] + h11 * h_ * m_[i + 1];
    }

private:
    double x0_ = 0.0, h_ = 1.0;
    std::vector<double> y_, m_;
};

}  // namespace lamperti
