#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iostream>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cvarplan/belief.hpp"
#include "cvarplan/cvar_vi.hpp"
#include "cvarplan/game.hpp"
#include "cvarplan/gp.hpp"
#include "cvarplan/mdp.hpp"

namespace cvarplan {

struct SearchConfig {
    double alpha = 0.03;       // confidence level; the root budget
    double c_mcts = 2.0;       // UCB exploration constant
    double c_bo = 2.0;         // LCB exploration constant for perturbation proposals
    double tau = 0.2;          // progressive-widening exponent
    int sims_initial = 100000; // simulations for the first online step
    int sims_step = 25000;     // simulations per step thereafter
    enum class Expansion { bayesopt, random };
    Expansion expansion = Expansion::bayesopt;
    int bo_candidates = 64;
    int bo_jitter = 8;
    // probability of descending into the least-visited child instead of the
    // confidence-bound pick; keeps one-sample value estimates from freezing
    // out an arm permanently (the bounds alone cannot recover from a bad
    // first rollout at this reward scale)
    double explore_kick = 0.01;
    std::uint64_t seed = 0;    // recorded for reproducibility; generators are caller-owned
    bool shadow_backup_check = false;  // maintain per-node return sums for tests
};

struct RootChildStat {
    int action = -1;
    double q = 0.0;
    std::int64_t visits = 0;
    int num_perturbations = 0;
};

struct SearchResult {
    int action = -1;
    Perturbation xi;  // aligned with the predictive successor row of `action`
    double value = 0.0;
    std::int64_t root_visits = 0;
    std::vector<RootChildStat> root_children;
};

struct StepDiagnostics {
    int step = 0;
    int state = 0;
    double budget = 1.0;
    SearchResult result;
};

/// Monte Carlo tree search over the Bayes-adaptive CVaR game: alternating
/// agent (UCB), adversary (progressive widening with GP-guided expansion) and
/// chance layers. One planner instance owns one tree and must be driven by a
/// single thread.
class Planner {
public:
    struct Node {
        Turn kind = Turn::agent;
        int state = 0;
        double budget = 1.0;
        int steps_done = 0;
        int pending_action = -1;
        std::int64_t visits = 0;
        double q = 0.0;
        Node* parent = nullptr;
        double edge_reward = 0.0;  // reward on the edge from parent (chance -> agent)

        // agent
        Belief belief;
        std::vector<int> untried;
        std::vector<std::pair<int, Node*>> action_children;

        // adversary
        std::vector<TransitionEntry> succ_row;
        std::vector<Node*> xi_children;
        bool forced_identity = false;
        std::int64_t widen_at = 0;  // next visit count that admits an expansion
        std::unique_ptr<GpModel> gp;

        // chance
        Perturbation xi;
        std::vector<GameOutcome> outcomes;
        std::vector<Node*> outcome_children;
    };

    Planner(std::shared_ptr<const BeliefModel> model, SearchConfig config,
            const vi::MdpVi* rollout_policy = nullptr)
        : model_(std::move(model)), config_(config), rollout_(rollout_policy) {
        if (!(config_.alpha > 0.0) || config_.alpha > 1.0)
            throw std::invalid_argument("Planner: alpha must lie in (0,1]");
        if (!(config_.tau > 0.0) || config_.tau >= 1.0)
            throw std::invalid_argument("Planner: tau must lie in (0,1)");
        if (rollout_ == nullptr) {
            std::cerr << "[cvarplan] warning: no rollout policy supplied; "
                         "rollouts use uniform legal actions\n";
        }
    }

    const SearchConfig& config() const { return config_; }

    /// Runs `num_sims` simulations from the given root and returns the
    /// highest-value agent action together with the minimizing perturbation
    /// under it.
    SearchResult search(const AugState& root_aug, int root_step, int num_sims, Rng& rng) {
        if (root_aug.turn != Turn::agent)
            throw std::invalid_argument("search: root must be an agent state");
        if (root_step >= horizon())
            throw std::invalid_argument("search: root state is terminal");
        if (num_sims < 1) throw std::invalid_argument("search: need at least one simulation");

        Node* root = reuse_root_;
        reuse_root_ = nullptr;
        if (root != nullptr &&
            (root->state != root_aug.state || root->steps_done != root_step ||
             std::abs(root->budget - root_aug.budget) > 1e-9))
            root = nullptr;
        if (root == nullptr) {
            arena_.clear();
            shadow_.clear();
            root = &arena_.emplace_back();
            root->kind = Turn::agent;
            root->state = root_aug.state;
            root->budget = root_aug.budget;
            root->steps_done = root_step;
            root->belief = root_aug.belief;
            init_agent(root, rng);
        }
        root->parent = nullptr;
        root->edge_reward = 0.0;

        for (int i = 0; i < num_sims; ++i) {
            Node* leaf = tree_policy(root, rng);
            const double value = default_policy(leaf, rng);
            update_nodes(leaf, value);
        }

        SearchResult result;
        result.root_visits = root->visits;
        Node* best = nullptr;
        for (const auto& [action, child] : root->action_children) {
            result.root_children.push_back(
                {action, child->q, child->visits, static_cast<int>(child->xi_children.size())});
            if (child->visits > 0 && (best == nullptr || child->q > best->q)) best = child;
        }
        if (best == nullptr) throw std::runtime_error("search: no action was explored");
        result.action = best->pending_action;
        result.value = best->q;
        Node* worst = nullptr;
        for (Node* c : best->xi_children)
            if (worst == nullptr || c->q < worst->q) worst = c;
        result.xi = worst != nullptr ? worst->xi
                                     : identity_perturbation(best->succ_row.size());
        last_root_ = root;
        last_best_child_ = best;
        last_worst_grandchild_ = worst;
        return result;
    }

    /// Online planning loop: search, execute the chosen action in the true
    /// environment, observe, update belief and budget, re-root, repeat.
    TrajectoryRecord act_online(const MdpSpec& env, Rng& rng,
                                std::vector<StepDiagnostics>* diagnostics = nullptr) {
        const MdpSpec& base = model_->base;
        if (env.num_states != base.num_states || env.num_actions != base.num_actions ||
            env.horizon != base.horizon)
            throw std::invalid_argument("act_online: environment shape mismatch");

        TrajectoryRecord traj;
        Belief belief(model_);
        int state = env.initial_state;
        double budget = config_.alpha;
        last_plan_seconds_ = 0.0;

        for (int t = 0; t < env.horizon; ++t) {
            AugState aug{state, belief, budget, Turn::agent, -1};
            const int sims = (t == 0) ? config_.sims_initial : config_.sims_step;
            const auto start = std::chrono::steady_clock::now();
            SearchResult res = search(aug, t, sims, rng);
            last_plan_seconds_ +=
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            const auto out = step(env, state, res.action, rng);
            traj.push(state, res.action, out.next, out.reward);

            const auto row = belief.predictive_row(state, res.action);
            double xi_realized = 1.0;
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (row[i].next == out.next) {
                    xi_realized = res.xi.weights.size() == row.size() ? res.xi.weights[i] : 1.0;
                    break;
                }
            }
            if (diagnostics != nullptr)
                diagnostics->push_back({t, state, budget, std::move(res)});
            budget = std::min(1.0, std::max(1e-6, budget * xi_realized));
            belief = belief.observed(state, res.action, out.next);
            state = out.next;
            adopt_reuse_root(state, budget);
        }
        reuse_root_ = nullptr;
        return traj;
    }

    /// Re-root the next search at the executed action's realized-outcome
    /// subtree (under the returned minimizing perturbation), which carries
    /// most of the previous step's visits. Returns false when no matching
    /// child exists, in which case the next search starts fresh.
    bool adopt_reuse_root(int realized_state, double next_budget) {
        reuse_root_ = nullptr;
        if (last_worst_grandchild_ == nullptr) return false;
        const auto& chance = *last_worst_grandchild_;
        for (std::size_t i = 0; i < chance.outcomes.size(); ++i) {
            Node* child = chance.outcome_children[i];
            if (child == nullptr || chance.outcomes[i].next != realized_state) continue;
            if (std::abs(child->budget - next_budget) > 1e-9) break;
            reuse_root_ = child;
            return true;
        }
        return false;
    }

    double last_plan_seconds() const { return last_plan_seconds_; }
    const Node* last_root() const { return last_root_; }

    /// Shadow accumulator check: with shadow_backup_check enabled, verifies
    /// that every node's running mean matches the mean of the returns backed
    /// up through it. Returns the worst absolute deviation.
    double worst_backup_deviation() const {
        double worst = 0.0;
        for (const auto& [node, acc] : shadow_) {
            if (acc.second == 0) continue;
            worst = std::max(worst,
                             std::abs(node->q - acc.first / static_cast<double>(acc.second)));
        }
        return worst;
    }

private:
    int horizon() const { return model_->base.horizon; }

    void init_agent(Node* v, Rng& rng) {
        v->untried = model_->base.legal[v->state];
        // fixed shuffled expansion order per node
        for (std::size_t i = v->untried.size(); i > 1; --i)
            std::swap(v->untried[i - 1], v->untried[uniform_index(rng, i)]);
    }

    Node* expand_agent(Node* v) {
        const int action = v->untried.back();
        v->untried.pop_back();
        Node* child = &arena_.emplace_back();
        child->kind = Turn::adversary;
        child->state = v->state;
        child->budget = v->budget;
        child->steps_done = v->steps_done;
        child->pending_action = action;
        child->parent = v;
        model_->predictive_row(v->belief.counts(), v->state, action, child->succ_row);
        child->forced_identity =
            child->succ_row.size() <= 1 || child->budget >= 1.0 - 1e-9;
        v->action_children.emplace_back(action, child);
        return child;
    }

    // progressive widening: expand while N^tau >= |expanded|; tracked as an
    // integer visit threshold to keep the check cheap
    static std::int64_t widen_threshold(std::size_t num_children, double tau) {
        if (num_children == 0) return 0;
        return static_cast<std::int64_t>(
            std::ceil(std::pow(static_cast<double>(num_children), 1.0 / tau) - 1e-9));
    }

    Node* expand_adversary(Node* v, Rng& rng) {
        Perturbation xi;
        if (v->xi_children.empty() || config_.expansion == SearchConfig::Expansion::random) {
            xi = random_perturbation(v->succ_row, v->budget, rng);
        } else {
            if (!v->gp) v->gp = std::make_unique<GpModel>(1.0 / (5.0 * v->budget), 1.0);
            std::vector<std::vector<double>> inputs;
            std::vector<double> labels;
            inputs.reserve(v->xi_children.size());
            for (Node* c : v->xi_children) {
                inputs.push_back(c->xi.weights);
                labels.push_back(c->q);
            }
            v->gp->set_data(std::move(inputs), std::move(labels));
            AcquisitionConfig acq;
            acq.exploration = config_.c_bo;
            acq.num_candidates = config_.bo_candidates;
            acq.num_incumbent_jitter = config_.bo_jitter;
            const auto& row = v->succ_row;
            const double budget = v->budget;
            auto sampler = [&row, budget, &rng] {
                return random_perturbation(row, budget, rng);
            };
            auto repair = [&row, budget](Perturbation& cand) {
                double weighted = 0.0;
                for (std::size_t i = 0; i < row.size(); ++i)
                    weighted += cand.weights[i] * row[i].prob;
                if (weighted <= 1e-12) return false;
                const double cap = 1.0 / budget;
                for (auto& w : cand.weights) {
                    w /= weighted;
                    if (w > cap + 1e-9) return false;
                    w = std::min(w, cap);
                }
                return true;
            };
            xi = propose(*v->gp, sampler, repair, acq, rng);
        }

        // duplicate proposals (e.g. the forced identity at budget 1) add no
        // information; select among existing children instead
        for (Node* c : v->xi_children) {
            double linf = 0.0;
            for (std::size_t i = 0; i < xi.weights.size(); ++i)
                linf = std::max(linf, std::abs(c->xi.weights[i] - xi.weights[i]));
            if (linf < 1e-9) return nullptr;
        }

        Node* child = &arena_.emplace_back();
        child->kind = Turn::chance;
        child->state = v->state;
        child->budget = v->budget;
        child->steps_done = v->steps_done;
        child->pending_action = v->pending_action;
        child->parent = v;
        child->xi = std::move(xi);
        child->outcomes = perturbed_outcomes(v->succ_row, child->xi.weights, v->budget);
        child->outcome_children.assign(child->outcomes.size(), nullptr);
        v->xi_children.push_back(child);
        v->widen_at = widen_threshold(v->xi_children.size(), config_.tau);
        return child;
    }

    Node* select_child(Node* v, Rng& rng) const {
        const std::size_t num_children = v->kind == Turn::agent ? v->action_children.size()
                                                                : v->xi_children.size();
        if (num_children > 1 && config_.explore_kick > 0.0 &&
            uniform01(rng) < config_.explore_kick) {
            Node* least = nullptr;
            auto consider = [&least](Node* c) {
                if (least == nullptr || c->visits < least->visits) least = c;
            };
            if (v->kind == Turn::agent) {
                for (const auto& [action, c] : v->action_children) consider(c);
            } else {
                for (Node* c : v->xi_children) consider(c);
            }
            return least;
        }
        return best_child(v, rng);
    }

    Node* best_child(Node* v, Rng& rng) const {
        const bool agent = v->kind == Turn::agent;
        const double logn = std::log(static_cast<double>(std::max<std::int64_t>(v->visits, 1)));
        double best = -std::numeric_limits<double>::infinity();
        Node* picks[16];
        std::size_t num_ties = 0;
        auto consider = [&](Node* c) {
            const double bonus = config_.c_mcts * std::sqrt(logn / static_cast<double>(c->visits));
            const double score = agent ? c->q + bonus : -(c->q - bonus);
            if (score > best + 1e-12) {
                best = score;
                picks[0] = c;
                num_ties = 1;
            } else if (score > best - 1e-12 && num_ties < 16) {
                picks[num_ties++] = c;
            }
        };
        if (agent) {
            for (const auto& [action, c] : v->action_children) consider(c);
        } else {
            for (Node* c : v->xi_children) consider(c);
        }
        if (num_ties == 0) throw std::runtime_error("best_child: node has no visited children");
        return num_ties == 1 ? picks[0] : picks[uniform_index(rng, num_ties)];
    }

    Node* chance_step(Node* v, Rng& rng) {
        const auto& outs = v->outcomes;
        const std::size_t idx = sample_categorical(
            outs.size(), 1.0, [&outs](std::size_t i) { return outs[i].prob; }, rng);
        Node*& child = v->outcome_children[idx];
        if (child == nullptr) {
            child = &arena_.emplace_back();
            child->kind = Turn::agent;
            child->state = outs[idx].next;
            child->budget = outs[idx].next_budget;
            child->steps_done = v->steps_done + 1;
            child->pending_action = -1;
            child->parent = v;
            child->edge_reward = outs[idx].reward;
            Node* owner = v->parent->parent;  // agent node above this chance node
            child->belief = owner->belief.observed(owner->state, v->pending_action, child->state);
            init_agent(child, rng);
        }
        return child;
    }

    Node* tree_policy(Node* root, Rng& rng) {
        Node* v = root;
        for (;;) {
            if (v->kind == Turn::agent) {
                if (v->steps_done >= horizon()) return v;  // terminal
                if (!v->untried.empty()) return expand_agent(v);
                v = select_child(v, rng);
            } else if (v->kind == Turn::adversary) {
                const bool may_widen =
                    v->xi_children.empty() || (!v->forced_identity && v->visits >= v->widen_at);
                if (may_widen) {
                    Node* child = expand_adversary(v, rng);
                    if (child != nullptr) return child;
                }
                v = select_child(v, rng);
            } else {
                v = chance_step(v, rng);
            }
        }
    }

    int rollout_action(int t, int state, double budget, Rng& rng) const {
        if (rollout_ != nullptr) return rollout_->action(t, state, budget);
        const auto& legal = model_->base.legal[state];
        return legal[uniform_index(rng, legal.size())];
    }

    /// Rollout to the horizon: agent moves from the precomputed value-iteration
    /// policy, chance outcomes from the unperturbed posterior predictive (the
    /// identity perturbation). Leaving the rollout adversary passive keeps
    /// leaf estimates optimistic for the agent, which the in-tree adversary
    /// minimization then corrects; a forceful rollout adversary makes the
    /// estimates pessimistic and freezes arms below their game values.
    double default_policy(Node* leaf, Rng& rng) {
        int state = leaf->state;
        double budget = leaf->budget;
        int t = leaf->steps_done;
        double total = 0.0;
        Turn turn = leaf->kind;
        int action = leaf->pending_action;

        // belief counts live on the nearest agent ancestor
        const Node* owner = leaf;
        while (owner->kind != Turn::agent) owner = owner->parent;
        scratch_counts_.assign(owner->belief.counts().begin(), owner->belief.counts().end());

        if (turn == Turn::chance) {
            // the leaf chance node already fixed its (perturbed) distribution
            const auto& outs = leaf->outcomes;
            const std::size_t idx = sample_categorical(
                outs.size(), 1.0, [&outs](std::size_t i) { return outs[i].prob; }, rng);
            total += outs[idx].reward;
            observe_counts(state, action, outs[idx].next);
            state = outs[idx].next;
            budget = outs[idx].next_budget;
            ++t;
            turn = Turn::agent;
        }

        while (t < horizon()) {
            if (turn == Turn::agent) action = rollout_action(t, state, budget, rng);
            model_->predictive_row(scratch_counts_, state, action, scratch_row_);
            const auto& outs = scratch_row_;
            const std::size_t idx = sample_categorical(
                outs.size(), 1.0, [&outs](std::size_t i) { return outs[i].prob; }, rng);
            total += outs[idx].reward;
            observe_counts(state, action, outs[idx].next);
            state = outs[idx].next;
            ++t;
            turn = Turn::agent;
        }
        return total;
    }

    void observe_counts(int state, int action, int next) {
        const int outcome = model_->outcome_of(state, action, next);
        if (outcome >= 0)
            scratch_counts_[model_->count_index(model_->binding_for(state, action)->group,
                                                outcome)] += 1;
    }

    void update_nodes(Node* leaf, double rollout_return) {
        double value = rollout_return;
        Node* v = leaf;
        while (v != nullptr) {
            v->visits += 1;
            v->q += (value - v->q) / static_cast<double>(v->visits);
            if (config_.shadow_backup_check) {
                auto& acc = shadow_[v];
                acc.first += value;
                acc.second += 1;
            }
            value += v->edge_reward;
            v = v->parent;
        }
    }

    std::shared_ptr<const BeliefModel> model_;
    SearchConfig config_;
    const vi::MdpVi* rollout_ = nullptr;

    std::deque<Node> arena_;
    Node* last_root_ = nullptr;
    Node* last_best_child_ = nullptr;
    Node* last_worst_grandchild_ = nullptr;
    Node* reuse_root_ = nullptr;
    double last_plan_seconds_ = 0.0;

    std::vector<std::uint32_t> scratch_counts_;
    std::vector<TransitionEntry> scratch_row_;
    std::vector<GameOutcome> scratch_outcomes_;
    std::unordered_map<const Node*, std::pair<double, std::int64_t>> shadow_;
};

}  // namespace cvarplan
