#pragma once

#include <cmath>

namespace quench {

// Neumaier compensated accumulator. Keeps million-term telescoping sums well
// inside the 1e-8 budget the energy bookkeeping is held to.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

} // namespace quench
