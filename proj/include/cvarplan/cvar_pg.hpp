#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "cvarplan/belief.hpp"
#include "cvarplan/cvar.hpp"
#include "cvarplan/cvar_vi.hpp"
#include "cvarplan/mdp.hpp"
#include "cvarplan/rng.hpp"

namespace cvarplan::pg {

/// Particle-filter belief over a fixed set of sampled transition functions.
/// Weights are reweighted by observation likelihood and renormalized.
struct ParticleBelief {
    std::vector<double> weights;

    static ParticleBelief uniform(std::size_t num_models) {
        ParticleBelief pb;
        pb.weights.assign(num_models, 1.0 / static_cast<double>(num_models));
        return pb;
    }
};

/// Updates particle weights for an observed transition. A fully degenerate
/// weight vector (all likelihoods zero) resets to uniform with a warning.
inline ParticleBelief particle_update(const ParticleBelief& pb,
                                      std::span<const MdpSpec> models, int s, int a, int next) {
    ParticleBelief out = pb;
    double total = 0.0;
    for (std::size_t m = 0; m < models.size(); ++m) {
        out.weights[m] *= models[m].transition(s, a, next);
        total += out.weights[m];
    }
    if (total <= 0.0) {
        std::cerr << "[cvarplan] warning: degenerate particle weights; resetting to uniform\n";
        return ParticleBelief::uniform(models.size());
    }
    for (auto& w : out.weights) w /= total;
    return out;
}

/// Bilinear softmax policy: logits F(h, s, a) = z(h)^T W phi(s, a) with
/// one-hot state-action features, so F = sum_m z_m W[m][s * A + a].
struct PolicyParams {
    int num_models = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> weights;  // [m][s * num_actions + a]
    double learning_rate = 0.001;
    int minibatch_size = 1000;

    double& at(int m, int s, int a) {
        return weights[(static_cast<std::size_t>(m) * num_states + s) * num_actions + a];
    }
    double at(int m, int s, int a) const {
        return weights[(static_cast<std::size_t>(m) * num_states + s) * num_actions + a];
    }

    static PolicyParams zeros(int num_models, int num_states, int num_actions) {
        PolicyParams p;
        p.num_models = num_models;
        p.num_states = num_states;
        p.num_actions = num_actions;
        p.weights.assign(
            static_cast<std::size_t>(num_models) * num_states * num_actions, 0.0);
        return p;
    }
};

/// Softmax action distribution over the legal actions at s.
inline std::vector<double> action_probs(const ParticleBelief& pb, int s,
                                        const PolicyParams& params,
                                        std::span<const int> legal) {
    std::vector<double> probs(legal.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < legal.size(); ++i) {
        double f = 0.0;
        for (int m = 0; m < params.num_models; ++m)
            f += pb.weights[m] * params.at(m, s, legal[i]);
        probs[i] = f;
        max_logit = std::max(max_logit, f);
    }
    double total = 0.0;
    for (auto& p : probs) {
        p = std::exp(p - max_logit);
        total += p;
    }
    for (auto& p : probs) p /= total;
    return probs;
}

/// One simulated trajectory together with the pieces needed for the
/// likelihood-ratio gradient: at each step the belief features, the visited
/// state, the legal actions, their probabilities and the chosen index.
struct PgTrajectory {
    struct Step {
        std::vector<double> z;
        int state = 0;
        std::vector<int> legal;
        std::vector<double> probs;
        int chosen = 0;
    };
    std::vector<Step> steps;
    double total_return = 0.0;
};

/// Monte Carlo CVaR gradient over a minibatch: with v the empirical VaR of
/// the returns, sums grad log P(traj) * (return - v) over trajectories in the
/// alpha-tail, scaled by 1/(alpha N). Ties at v contribute zero.
inline std::vector<double> cvar_gradient(std::span<const PgTrajectory> minibatch, double alpha,
                                         const PolicyParams& params) {
    check_alpha(alpha);
    const std::size_t n = minibatch.size();
    if (n < static_cast<std::size_t>(std::ceil(1.0 / alpha)))
        throw std::invalid_argument("cvar_gradient: minibatch smaller than 1/alpha");

    std::vector<double> returns(n);
    for (std::size_t i = 0; i < n; ++i) returns[i] = minibatch[i].total_return;
    const double var = empirical_var(returns, alpha);

    std::vector<double> grad(params.weights.size(), 0.0);
    const double scale = 1.0 / (alpha * static_cast<double>(n));
    for (const auto& traj : minibatch) {
        if (traj.total_return > var) continue;
        const double advantage = traj.total_return - var;
        if (advantage == 0.0) continue;
        for (const auto& step : traj.steps) {
            for (std::size_t i = 0; i < step.legal.size(); ++i) {
                const double indicator = (static_cast<int>(i) == step.chosen) ? 1.0 : 0.0;
                const double d = indicator - step.probs[i];
                if (d == 0.0) continue;
                for (int m = 0; m < params.num_models; ++m) {
                    grad[(static_cast<std::size_t>(m) * params.num_states + step.state) *
                             params.num_actions +
                         step.legal[i]] += scale * advantage * step.z[m] * d;
                }
            }
        }
    }
    return grad;
}

struct TrainOptions {
    int num_models = 25;
    std::int64_t total_sims = 2'000'000;
    int eval_every = 20'000;    // simulations between evaluation points
    int eval_episodes = 2000;
    double learning_rate = 0.001;
    int minibatch_size = 1000;
};

struct TrainCurvePoint {
    std::int64_t sims = 0;
    double cvar = 0.0;
    double se = 0.0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<TrainCurvePoint> curve;
    std::vector<MdpSpec> models;  // the particle set used during training
};

/// Simulates one episode with the softmax policy in a concrete environment,
/// recording what the gradient needs. Used for both training and evaluation.
inline PgTrajectory simulate_episode(const MdpSpec& env, std::span<const MdpSpec> models,
                                     const PolicyParams& params, Rng& rng,
                                     bool record_steps = true) {
    PgTrajectory traj;
    ParticleBelief pb = ParticleBelief::uniform(models.size());
    int s = env.initial_state;
    for (int t = 0; t < env.horizon; ++t) {
        const auto& legal = env.legal[s];
        const auto probs = action_probs(pb, s, params, legal);
        const std::size_t pick = sample_categorical(
            probs.size(), 1.0, [&probs](std::size_t i) { return probs[i]; }, rng);
        const int action = legal[pick];
        const auto res = step(env, s, action, rng);
        if (record_steps)
            traj.steps.push_back({pb.weights, s, legal, probs, static_cast<int>(pick)});
        traj.total_return += res.reward;
        pb = particle_update(pb, models, s, action, res.next);
        s = res.next;
    }
    return traj;
}

/// Initialization from a solved expected-MDP policy: weight 2 on the action
/// the policy picks (at the full-horizon stage and the grid point nearest the
/// target level), 1 elsewhere.
inline PolicyParams init_from_vi(const vi::MdpVi& emdp_vi, int num_models, double alpha,
                                 const TrainOptions& options) {
    const MdpSpec& mdp = emdp_vi.mdp;
    PolicyParams params = PolicyParams::zeros(num_models, mdp.num_states, mdp.num_actions);
    params.learning_rate = options.learning_rate;
    params.minibatch_size = options.minibatch_size;
    for (int s = 0; s < mdp.num_states; ++s) {
        // betting states encode their stage; other domains use the
        // full-horizon policy
        int t = 0;
        if (mdp.num_states == betting::num_states())
            t = std::min(betting::stage_of(s), mdp.horizon - 1);
        const int chosen = emdp_vi.action(t, s, alpha);
        for (int a : mdp.legal[s])
            for (int m = 0; m < num_models; ++m)
                params.at(m, s, a) = (a == chosen) ? 2.0 : 1.0;
    }
    return params;
}

/// Minibatch CVaR policy-gradient training. Each episode root-samples a
/// ground-truth model from the prior; every eval_every simulations the current
/// policy is evaluated on fresh prior-sampled environments.
inline TrainResult train(const std::shared_ptr<const BeliefModel>& model, double alpha,
                         const TrainOptions& options, std::uint64_t seed) {
    check_alpha(alpha);
    Belief prior(model);
    Rng setup_rng = derive_rng(seed, 0xA001);
    TrainResult result;
    result.models.reserve(options.num_models);
    for (int m = 0; m < options.num_models; ++m)
        result.models.push_back(prior.sample_transition_fn(setup_rng));

    const auto emdp_vi = vi::solve_mdp(prior.expected_mdp(), alpha);
    result.params = init_from_vi(emdp_vi, options.num_models, alpha, options);

    auto evaluate = [&](std::int64_t sims_done, Rng& eval_rng) {
        std::vector<double> returns(options.eval_episodes);
        for (int e = 0; e < options.eval_episodes; ++e) {
            const MdpSpec env = prior.sample_transition_fn(eval_rng);
            returns[e] =
                simulate_episode(env, result.models, result.params, eval_rng, false).total_return;
        }
        result.curve.push_back(
            {sims_done, empirical_cvar(returns, alpha), empirical_cvar_se(returns, alpha)});
    };

    std::vector<PgTrajectory> minibatch;
    std::int64_t sims_done = 0;
    std::int64_t next_eval = options.eval_every;
    int batch_index = 0;
    Rng eval_rng = derive_rng(seed, 0xE7A1);
    evaluate(0, eval_rng);
    while (sims_done < options.total_sims) {
        Rng rng = derive_rng(seed, 0xB000 + static_cast<std::uint64_t>(batch_index++));
        minibatch.clear();
        for (int i = 0; i < options.minibatch_size; ++i) {
            const MdpSpec env = prior.sample_transition_fn(rng);
            minibatch.push_back(simulate_episode(env, result.models, result.params, rng));
        }
        const auto grad = cvar_gradient(minibatch, alpha, result.params);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            result.params.weights[i] += options.learning_rate * grad[i];
            if (!std::isfinite(result.params.weights[i]))
                throw std::runtime_error("pg::train diverged: non-finite weight after " +
                                         std::to_string(sims_done) + " simulations");
        }
        sims_done += options.minibatch_size;
        if (sims_done >= next_eval) {
            evaluate(sims_done, eval_rng);
            next_eval += options.eval_every;
        }
    }
    return result;
}

}  // namespace cvarplan::pg
