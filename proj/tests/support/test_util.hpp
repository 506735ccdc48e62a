#pragma once

#include <vector>

#include "cvarplan/cvar.hpp"
#include "cvarplan/rng.hpp"

namespace testutil {

/// Random discrete distribution with the given support size.
inline cvarplan::DiscreteDistribution random_distribution(cvarplan::Rng& rng, int num_outcomes,
                                                          double value_scale = 20.0) {
    cvarplan::DiscreteDistribution dist;
    double total = 0.0;
    std::vector<double> raw(num_outcomes);
    for (auto& p : raw) {
        p = cvarplan::uniform01(rng) + 1e-3;
        total += p;
    }
    for (int i = 0; i < num_outcomes; ++i) {
        dist.outcomes.push_back(
            {(cvarplan::uniform01(rng) * 2.0 - 1.0) * value_scale, raw[i] / total});
    }
    return dist;
}

/// Exhaustive search over the risk envelope on a grid of perturbed
/// probability vectors (resolution steps per unit); supports 2 or 3 outcomes.
inline double grid_envelope_min(const cvarplan::DiscreteDistribution& dist, double alpha,
                                int steps = 1000) {
    const std::size_t n = dist.outcomes.size();
    const double cap = 1.0 / alpha;
    double best = std::numeric_limits<double>::infinity();
    if (n == 2) {
        const double p0 = dist.outcomes[0].prob, p1 = dist.outcomes[1].prob;
        for (int i = 0; i <= steps; ++i) {
            const double q0 = static_cast<double>(i) / steps;
            const double q1 = 1.0 - q0;
            if (p0 > 0 && q0 / p0 > cap + 1e-12) continue;
            if (p1 > 0 && q1 / p1 > cap + 1e-12) continue;
            if (p0 <= 0 && q0 > 0) continue;
            if (p1 <= 0 && q1 > 0) continue;
            best = std::min(best, q0 * dist.outcomes[0].value + q1 * dist.outcomes[1].value);
        }
        return best;
    }
    if (n == 3) {
        const double p0 = dist.outcomes[0].prob, p1 = dist.outcomes[1].prob,
                     p2 = dist.outcomes[2].prob;
        for (int i = 0; i <= steps; ++i) {
            const double q0 = static_cast<double>(i) / steps;
            if (p0 > 0 ? q0 / p0 > cap + 1e-12 : q0 > 0) continue;
            for (int j = 0; i + j <= steps; ++j) {
                const double q1 = static_cast<double>(j) / steps;
                const double q2 = 1.0 - q0 - q1;
                if (p1 > 0 ? q1 / p1 > cap + 1e-12 : q1 > 0) continue;
                if (p2 > 0 ? q2 / p2 > cap + 1e-12 : q2 > 0) continue;
                best = std::min(best, q0 * dist.outcomes[0].value + q1 * dist.outcomes[1].value +
                                          q2 * dist.outcomes[2].value);
            }
        }
        return best;
    }
    throw std::invalid_argument("grid_envelope_min supports 2 or 3 outcomes");
}

}  // namespace testutil
