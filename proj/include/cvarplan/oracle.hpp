#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "cvarplan/cvar.hpp"

namespace cvarplan::oracle {

// Desk-scale brute-force machinery on a two-state, two-action, two-step
// Bayes-adaptive problem with a two-point prior over transition functions.
// Everything here is deliberately independent of the planner and the value
// iteration: policies are enumerated, adversaries are discretized on grids,
// and the three routes to the same number (direct CVaR of the best policy,
// the stochastic-game value, and the perturbed-prior minimization) can be
// cross-checked against each other.

struct MicroBamdp {
    // transition tensors indexed [model][s][a][s']; every entry positive
    std::array<std::array<std::array<std::array<double, 2>, 2>, 2>, 2> transition{};
    std::array<std::array<std::array<double, 2>, 2>, 2> reward{};  // [s][a][s']
    double prior_a = 0.5;  // prior weight of model 0
    int initial_state = 0;
    static constexpr int horizon = 2;
};

/// Fixed test instance: action 0 is mildly informative and safe, action 1 is
/// risky with model-dependent odds.
inline MicroBamdp micro_instance() {
    MicroBamdp m;
    for (int s = 0; s < 2; ++s) {
        m.transition[0][s][0] = {0.6, 0.4};
        m.transition[1][s][0] = {0.4, 0.6};
        m.transition[0][s][1] = {0.2, 0.8};
        m.transition[1][s][1] = {0.7, 0.3};
        m.reward[s][0] = {1.0, 1.0};
        m.reward[s][1] = {-2.0, 3.0};
    }
    m.prior_a = 0.5;
    return m;
}

/// History-dependent deterministic policy for the micro instance: an action
/// at the root and one per first-step successor state.
struct MicroPolicy {
    int root_action = 0;
    std::array<int, 2> second_action{};  // indexed by realized successor state
};

inline std::vector<MicroPolicy> enumerate_policies() {
    std::vector<MicroPolicy> out;
    for (int u = 0; u < 2; ++u)
        for (int v0 = 0; v0 < 2; ++v0)
            for (int v1 = 0; v1 < 2; ++v1) out.push_back({u, {v0, v1}});
    return out;
}

/// Posterior weight of model 0 after observing one transition.
inline double posterior_a(const MicroBamdp& m, double prior_a, int s, int a, int next) {
    const double la = prior_a * m.transition[0][s][a][next];
    const double lb = (1.0 - prior_a) * m.transition[1][s][a][next];
    return la / (la + lb);
}

inline double predictive(const MicroBamdp& m, double weight_a, int s, int a, int next) {
    return weight_a * m.transition[0][s][a][next] +
           (1.0 - weight_a) * m.transition[1][s][a][next];
}

/// Exact return distribution of a policy in the Bayes-adaptive problem:
/// enumerates the four length-2 histories with their marginal probabilities.
inline DiscreteDistribution bamdp_return_distribution(const MicroBamdp& m,
                                                      const MicroPolicy& policy) {
    DiscreteDistribution dist;
    const int s0 = m.initial_state;
    const int a0 = policy.root_action;
    for (int s1 = 0; s1 < 2; ++s1) {
        const double p1 = predictive(m, m.prior_a, s0, a0, s1);
        const double post = posterior_a(m, m.prior_a, s0, a0, s1);
        const int a1 = policy.second_action[s1];
        for (int s2 = 0; s2 < 2; ++s2) {
            const double p2 = predictive(m, post, s1, a1, s2);
            dist.outcomes.push_back(
                {m.reward[s0][a0][s1] + m.reward[s1][a1][s2], p1 * p2});
        }
    }
    return dist;
}

/// Route 1: best CVaR over the enumerated history-dependent policies.
inline double best_policy_cvar(const MicroBamdp& m, double alpha) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& policy : enumerate_policies())
        best = std::max(best, exact_cvar(bamdp_return_distribution(m, policy), alpha));
    return best;
}

/// Route 2: the stochastic-game value with the adversary discretized. At each
/// adversary turn the perturbed first-successor probability is swept over a
/// grid restricted to the admissible interval.
inline double game_value(const MicroBamdp& m, double alpha, int grid_points = 101) {
    struct Solver {
        const MicroBamdp& m;
        int grid_points;

        double agent_value(int s, double weight_a, double budget, int t) const {
            if (t >= MicroBamdp::horizon) return 0.0;
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < 2; ++a) best = std::max(best, adversary_value(s, a, weight_a, budget, t));
            return best;
        }

        double adversary_value(int s, int a, double weight_a, double budget, int t) const {
            const double p0 = predictive(m, weight_a, s, a, 0);
            const double p1 = 1.0 - p0;
            const double lo = std::max(0.0, 1.0 - p1 / budget);
            const double hi = std::min(1.0, p0 / budget);
            double best = std::numeric_limits<double>::infinity();
            for (int g = 0; g < grid_points; ++g) {
                const double q0 = lo + (hi - lo) * g / (grid_points - 1);
                double value = 0.0;
                const double qs[2] = {q0, 1.0 - q0};
                const double ps[2] = {p0, p1};
                for (int next = 0; next < 2; ++next) {
                    if (qs[next] < 1e-12) continue;
                    const double xi = qs[next] / ps[next];
                    const double next_budget = std::min(1.0, budget * xi);
                    const double post = posterior_a(m, weight_a, s, a, next);
                    value += qs[next] *
                             (m.reward[s][a][next] + agent_value(next, post, next_budget, t + 1));
                }
                best = std::min(best, value);
            }
            return best;
        }
    };
    return Solver{m, grid_points}.agent_value(m.initial_state, m.prior_a, alpha, 0);
}

/// Route 3: per-policy minimization over a perturbed prior and perturbed
/// transition functions on grids, subject to the per-path product constraint
/// (prior perturbation times the path's transition perturbations bounded by
/// 1/alpha). Returns the minimized expected return for the given policy.
inline double perturbed_prior_value(const MicroBamdp& m, const MicroPolicy& policy, double alpha,
                                    int grid_points = 51) {
    const int s0 = m.initial_state;
    const int a0 = policy.root_action;
    const double cap = 1.0 / alpha;
    const double w[2] = {m.prior_a, 1.0 - m.prior_a};

    double best = std::numeric_limits<double>::infinity();
    for (int gd = 0; gd < grid_points; ++gd) {
        // delta_0 sweeps its admissible range; delta_1 is forced by
        // normalization of the perturbed prior
        const double delta0 = (static_cast<double>(gd) / (grid_points - 1)) / w[0];
        const double delta1 = (1.0 - delta0 * w[0]) / w[1];
        if (delta1 < -1e-12) continue;
        const double deltas[2] = {delta0, delta1};

        double total = 0.0;
        bool feasible = true;
        for (int p = 0; p < 2 && feasible; ++p) {
            // independent inner minimization for each plausible model: sweep
            // the perturbed probabilities of the three reachable rows
            const double delta = deltas[p];
            double inner_best = std::numeric_limits<double>::infinity();
            for (int g0 = 0; g0 < grid_points; ++g0) {
                const double q0 = static_cast<double>(g0) / (grid_points - 1);
                const double root_probs[2] = {q0, 1.0 - q0};
                // second-step rows can be minimized independently per s1
                double row_value[2];
                for (int s1 = 0; s1 < 2; ++s1) {
                    const int a1 = policy.second_action[s1];
                    const double root_xi =
                        root_probs[s1] / m.transition[p][s0][a0][s1];
                    double best_row = std::numeric_limits<double>::infinity();
                    for (int g1 = 0; g1 < grid_points; ++g1) {
                        const double q1 = static_cast<double>(g1) / (grid_points - 1);
                        const double leaf_probs[2] = {q1, 1.0 - q1};
                        bool ok = true;
                        double v = 0.0;
                        for (int s2 = 0; s2 < 2; ++s2) {
                            const double leaf_xi =
                                leaf_probs[s2] / m.transition[p][s1][a1][s2];
                            if (delta * root_xi * leaf_xi > cap + 1e-9) ok = false;
                            v += leaf_probs[s2] *
                                 (m.reward[s1][a1][s2]);
                        }
                        if (!ok) continue;
                        best_row = std::min(best_row, v);
                    }
                    row_value[s1] = best_row;
                }
                bool ok = true;
                double v = 0.0;
                for (int s1 = 0; s1 < 2; ++s1) {
                    if (root_probs[s1] < 1e-12) continue;
                    if (!std::isfinite(row_value[s1])) {
                        ok = false;
                        break;
                    }
                    v += root_probs[s1] * (m.reward[s0][a0][s1] + row_value[s1]);
                }
                if (ok) inner_best = std::min(inner_best, v);
            }
            if (!std::isfinite(inner_best)) {
                feasible = false;
                break;
            }
            total += w[p] * delta * inner_best;
        }
        if (feasible) best = std::min(best, total);
    }
    return best;
}

inline double best_perturbed_prior_value(const MicroBamdp& m, double alpha,
                                         int grid_points = 51) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& policy : enumerate_policies())
        best = std::max(best, perturbed_prior_value(m, policy, alpha, grid_points));
    return best;
}

}  // namespace cvarplan::oracle
