#pragma once

// Central finite-difference check of the GIN loss gradient.

#include <algorithm>
#include <cmath>

#include "craq/gin.hpp"

namespace craq::testing {

/// Worst relative error over all parameters. The denominator is floored at
/// 1e-6: with step 1e-6 the difference quotient carries about 1e-10 of
/// rounding noise, which would otherwise swamp near-zero gradients.
inline double max_gradient_error(const GinModel& m, const std::vector<const GinGraph*>& gs, const std::vector<int>& ys,
                                 double h = 1e-6) {
    std::vector<double> grad;
    loss_and_gradient(m, gs, ys, &grad);
    auto p = m.pack();
    GinModel probe = m;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        probe.unpack(p);
        const double lp = loss_and_gradient(probe, gs, ys, nullptr);
        p[i] = keep - h;
        probe.unpack(p);
        const double lm = loss_and_gradient(probe, gs, ys, nullptr);
        p[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
    }
    return worst;
}

}  // namespace craq::testing
