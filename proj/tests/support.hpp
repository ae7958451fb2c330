#pragma once

// Reference models shared across the suite.
//
// brownian:   psi(s) = s^2 - s          p = 1, gamma = 1, Phi'(0) = 1,
//             W(x) = e^x - 1, W_p = 1 - e^{-x}
// cp_exp:     sigma = 0, compound Poisson rate 1 with Exp(1) jumps and
//             mu = 1/2 - 2/e chosen so gamma = 1/2. Then
//             psi(s) = s(s-1)/(2(1+s)), p = 1, W(x) = 4 e^x - 2, Phi'(0) = 4.
// power_tail: sigma^2 = 1, mu = -1/2, Pi = 0.5 x^{-2.5} dx on (0.01, inf);
//             gamma = 1/2 > 0, compensation variance 0.1 folded into sigma.

#include <cmath>

#include "lamperti/levy_model.hpp"
#include "lamperti/rate_function.hpp"

namespace testing_models {

inline lamperti::LevyModel brownian() { return lamperti::LevyModel(2.0, 1.0); }

inline lamperti::LevyModel cp_exp() {
    lamperti::CompoundPoissonJumps cp{1.0, lamperti::ExponentialDensity{1.0}};
    return lamperti::LevyModel(0.0, 0.5 - 2.0 / std::exp(1.0), lamperti::JumpMeasure(cp));
}

inline lamperti::LevyModel power_tail() {
    lamperti::PowerTailJumps pt{0.5, 1.5, 0.01};
    return lamperti::LevyModel(1.0, -0.5, lamperti::JumpMeasure(pt));
}

inline double cp_exp_scale_w(double x) { return 4.0 * std::exp(x) - 2.0; }

inline lamperti::RateFunction rate_power2() {
    return lamperti::RateFunction(lamperti::PowerRate{1.0, 2.0, 1.0});  // (1+x)^2
}

inline lamperti::RateFunction rate_exp(double lambda = 1.0) {
    return lamperti::RateFunction(lamperti::ExponentialRate{lambda, 1.0});
}

inline lamperti::RateFunction rate_const(double value = 1.0) {
    return lamperti::RateFunction(lamperti::PowerRate{0.0, 0.0, value});  // R == value
}

}  // namespace testing_models
