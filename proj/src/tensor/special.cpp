#include <cmath>

#include "oasis/tensor/ops.hpp"

namespace oasis {

// Digamma via recurrence shift to x >= 10 plus the asymptotic expansion.
// Good to ~1e-14 for x > 0.
double digamma_d(double x) {
    double value = 0.0;
    while (x < 10.0) {
        value -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    // Bernoulli terms B2/(2x^2), B4/(4x^4), ...
    series -= inv2 * (1.0 / 12.0 -
                      inv2 * (1.0 / 120.0 -
                              inv2 * (1.0 / 252.0 -
                                      inv2 * (1.0 / 240.0 -
                                              inv2 * (1.0 / 132.0 -
                                                      inv2 * (691.0 / 32760.0))))));
    return value + series;
}

double trigamma_d(double x) {
    double value = 0.0;
    while (x < 10.0) {
        value += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B2n / x^(2n+1)
    double series =
        inv + 0.5 * inv2 +
        inv * inv2 * (1.0 / 6.0 -
                      inv2 * (1.0 / 30.0 -
                              inv2 * (1.0 / 42.0 -
                                      inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    return value + series;
}

}  // namespace oasis
