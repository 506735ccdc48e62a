#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cvarplan/belief.hpp"
#include "cvarplan/mdp.hpp"
#include "cvarplan/rng.hpp"

namespace cvarplan {

// The Bayes-adaptive CVaR stochastic game. Augmented states carry the
// environment state, the belief, and the adversary budget factor in (0, 1].
// The adversary reweights posterior-predictive transition probabilities with
// weights bounded by 1/budget that keep the row a valid distribution; the
// budget of a successor is multiplied by the weight applied to it.

enum class Turn { agent, adversary, chance };

struct AugState {
    int state = 0;
    Belief belief;
    double budget = 1.0;
    Turn turn = Turn::agent;
    int pending_action = -1;  // set once an agent action has been chosen
};

/// Adversary action: one nonnegative weight per supported successor,
/// index-aligned with the posterior-predictive row of the pending action.
struct Perturbation {
    std::vector<double> weights;
};

inline Perturbation identity_perturbation(std::size_t num_successors) {
    return Perturbation{std::vector<double>(num_successors, 1.0)};
}

/// Supported successors and posterior-predictive probabilities for an agent
/// action; probabilities sum to 1.
inline std::vector<TransitionEntry> successors(const AugState& aug, int action) {
    if (!aug.belief.model().base.is_legal(aug.state, action))
        throw std::invalid_argument("successors: illegal action " + std::to_string(action) +
                                    " in state " + std::to_string(aug.state));
    return aug.belief.predictive_row(aug.state, action);
}

inline bool is_admissible(std::span<const double> xi, std::span<const TransitionEntry> row,
                          double budget, double tol = 1e-9) {
    if (xi.size() != row.size()) return false;
    const double cap = 1.0 / budget;
    double weighted = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
        if (xi[i] < -tol || xi[i] > cap + tol) return false;
        weighted += xi[i] * row[i].prob;
    }
    return std::abs(weighted - 1.0) <= tol;
}

inline bool is_admissible(const Perturbation& xi, const AugState& aug, int action,
                          double tol = 1e-9) {
    const auto row = successors(aug, action);
    return is_admissible(xi.weights, row, aug.budget, tol);
}

struct GameOutcome {
    int next = 0;
    double prob = 0.0;
    double reward = 0.0;
    double next_budget = 1.0;
};

/// Applies a perturbation to a predictive row: probabilities become
/// xi * T, successor budgets become min(1, budget * xi). Successors whose
/// perturbed probability falls below 1e-12 are dropped and the rest
/// renormalized, which avoids zero-budget singularities.
inline std::vector<GameOutcome> perturbed_outcomes(std::span<const TransitionEntry> row,
                                                   std::span<const double> xi, double budget) {
    std::vector<GameOutcome> out;
    out.reserve(row.size());
    double total = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double p = xi[i] * row[i].prob;
        if (p < 1e-12) continue;
        out.push_back({row[i].next, p, row[i].reward, std::min(1.0, budget * xi[i])});
        total += p;
    }
    for (auto& o : out) o.prob /= total;
    return out;
}

/// The game transition: distribution over successor augmented states after
/// the adversary picks a perturbation. Rejects inadmissible perturbations.
inline std::vector<std::pair<AugState, double>> perturbed_transition(const AugState& aug,
                                                                     int action,
                                                                     const Perturbation& xi) {
    const auto row = successors(aug, action);
    if (!is_admissible(xi.weights, row, aug.budget))
        throw std::invalid_argument("perturbed_transition: inadmissible perturbation");
    std::vector<std::pair<AugState, double>> result;
    for (const auto& o : perturbed_outcomes(row, xi.weights, aug.budget)) {
        AugState next;
        next.state = o.next;
        next.belief = aug.belief.observed(aug.state, action, o.next);
        next.budget = o.next_budget;
        next.turn = Turn::agent;
        result.emplace_back(std::move(next), o.prob);
    }
    return result;
}

namespace detail {

// Uniform sampling from {q in simplex : q_i <= bound_i}. For one, two or
// three successors the region is a point, an interval, or a convex polygon,
// all of which are sampled exactly; this matches the distribution of
// flat-Dirichlet rejection sampling without its cost blow-up when the region
// is narrow. Larger supports fall back to rejection.
inline bool uniform_capped_simplex(std::span<const double> bounds, std::span<double> q, Rng& rng) {
    const std::size_t n = bounds.size();
    if (n == 1) {
        q[0] = 1.0;
        return true;
    }
    if (n == 2) {
        const double lo = std::max(0.0, 1.0 - bounds[1]);
        const double hi = std::min(1.0, bounds[0]);
        if (hi < lo - 1e-12) return false;
        q[0] = hi <= lo ? lo : lo + uniform01(rng) * (hi - lo);
        q[1] = 1.0 - q[0];
        return true;
    }
    if (n == 3) {
        // polygon in the (q0, q1) plane: the projected simplex clipped by the caps
        std::array<std::array<double, 2>, 8> poly = {{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
        std::size_t count = 3;
        // halfplanes a.x <= c: q0 <= b0, q1 <= b1, -(q0+q1) <= b2 - 1
        const std::array<std::array<double, 3>, 3> clips = {{{1.0, 0.0, bounds[0]},
                                                             {0.0, 1.0, bounds[1]},
                                                             {-1.0, -1.0, bounds[2] - 1.0}}};
        std::array<std::array<double, 2>, 8> next{};
        for (const auto& clip : clips) {
            std::size_t m = 0;
            for (std::size_t i = 0; i < count; ++i) {
                const auto& cur = poly[i];
                const auto& prev = poly[(i + count - 1) % count];
                const double dc = clip[0] * cur[0] + clip[1] * cur[1] - clip[2];
                const double dp = clip[0] * prev[0] + clip[1] * prev[1] - clip[2];
                if ((dp <= 1e-14) != (dc <= 1e-14)) {
                    const double t = dp / (dp - dc);
                    next[m][0] = prev[0] + t * (cur[0] - prev[0]);
                    next[m][1] = prev[1] + t * (cur[1] - prev[1]);
                    ++m;
                }
                if (dc <= 1e-14) next[m++] = cur;
            }
            poly = next;
            count = m;
            if (count == 0) return false;
        }
        double area2 = 0.0;
        for (std::size_t i = 1; i + 1 < count; ++i) {
            area2 += (poly[i][0] - poly[0][0]) * (poly[i + 1][1] - poly[0][1]) -
                     (poly[i + 1][0] - poly[0][0]) * (poly[i][1] - poly[0][1]);
        }
        if (area2 <= 1e-14) {
            // (near-)degenerate region; return its reference point
            q[0] = poly[0][0];
            q[1] = poly[0][1];
            q[2] = std::max(0.0, 1.0 - q[0] - q[1]);
            return true;
        }
        double pick = uniform01(rng) * area2;
        std::size_t tri = 1;
        for (; tri + 2 < count; ++tri) {
            const double a = (poly[tri][0] - poly[0][0]) * (poly[tri + 1][1] - poly[0][1]) -
                             (poly[tri + 1][0] - poly[0][0]) * (poly[tri][1] - poly[0][1]);
            if (pick <= a) break;
            pick -= a;
        }
        const double r1 = std::sqrt(uniform01(rng));
        const double r2 = uniform01(rng);
        q[0] = (1.0 - r1) * poly[0][0] + r1 * (1.0 - r2) * poly[tri][0] + r1 * r2 * poly[tri + 1][0];
        q[1] = (1.0 - r1) * poly[0][1] + r1 * (1.0 - r2) * poly[tri][1] + r1 * r2 * poly[tri + 1][1];
        q[2] = std::max(0.0, 1.0 - q[0] - q[1]);
        return true;
    }
    // generic rejection path
    std::vector<double> ones(n, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        dirichlet_sample(ones, q, rng);
        bool ok = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (q[i] > bounds[i]) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
    }
    return false;
}

}  // namespace detail

/// Uniformly-spread admissible perturbation: draws a perturbed probability
/// vector uniformly from the feasible polytope and converts it to weights.
/// Falls back to the identity perturbation when the region degenerates.
inline Perturbation random_perturbation(std::span<const TransitionEntry> row, double budget,
                                        Rng& rng) {
    const std::size_t n = row.size();
    Perturbation xi;
    xi.weights.assign(n, 1.0);
    if (n <= 1 || budget >= 1.0 - 1e-9) return xi;  // identity is the only admissible point

    std::vector<double> bounds(n), q(n);
    for (std::size_t i = 0; i < n; ++i) bounds[i] = std::min(1.0, row[i].prob / budget);
    if (!detail::uniform_capped_simplex(bounds, q, rng)) return xi;
    for (std::size_t i = 0; i < n; ++i) {
        xi.weights[i] = row[i].prob > 0.0 ? q[i] / row[i].prob : 0.0;
        // guard against round-off just past the cap
        xi.weights[i] = std::min(xi.weights[i], 1.0 / budget);
    }
    return xi;
}

inline Perturbation random_perturbation(const AugState& aug, int action, Rng& rng) {
    const auto row = successors(aug, action);
    return random_perturbation(row, aug.budget, rng);
}

}  // namespace cvarplan
