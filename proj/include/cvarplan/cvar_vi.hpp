#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cvarplan/belief.hpp"
#include "cvarplan/game.hpp"
#include "cvarplan/mdp.hpp"

namespace cvarplan::vi {

/// Discretization of the continuous confidence factor: log-spaced points on
/// [alpha/10, 1] with alpha and 1 always included.
struct BudgetGrid {
    std::vector<double> points;
    std::vector<double> log_points;

    static BudgetGrid make(double alpha, int n = 20) {
        if (!(alpha > 0.0) || alpha > 1.0)
            throw std::invalid_argument("BudgetGrid: alpha must lie in (0,1]");
        if (n < 2) throw std::invalid_argument("BudgetGrid: need at least two points");
        BudgetGrid grid;
        const double lo = std::log(alpha / 10.0);
        for (int i = 0; i < n; ++i)
            grid.points.push_back(std::exp(lo + (0.0 - lo) * i / (n - 1)));
        grid.points.push_back(alpha);
        std::sort(grid.points.begin(), grid.points.end());
        grid.points.erase(std::unique(grid.points.begin(), grid.points.end(),
                                      [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                          grid.points.end());
        grid.points.back() = 1.0;
        for (double p : grid.points) grid.log_points.push_back(std::log(p));
        return grid;
    }

    int size() const { return static_cast<int>(points.size()); }

    /// Index of the grid point nearest to y in log space.
    int nearest(double y) const {
        const double ly = std::log(std::max(y, 1e-300));
        const auto it = std::lower_bound(log_points.begin(), log_points.end(), ly);
        if (it == log_points.begin()) return 0;
        if (it == log_points.end()) return size() - 1;
        const int hi = static_cast<int>(it - log_points.begin());
        return (ly - log_points[hi - 1] <= log_points[hi] - ly) ? hi - 1 : hi;
    }

    /// Exact index of a value known to be on the grid (e.g. the target alpha).
    int index_of(double y) const {
        for (int i = 0; i < size(); ++i)
            if (std::abs(points[i] - y) < 1e-12) return i;
        throw std::invalid_argument("BudgetGrid: value " + std::to_string(y) + " is not on the grid");
    }
};

enum class Interp {
    budget_value,  // interpolate y*V(s,y) linearly in y (default; keeps the inner problem an LP)
    direct_value,  // interpolate V(s,y) itself; diagnostic comparison mode
};

struct InnerSolution {
    double value = 0.0;
    Perturbation xi;
};

namespace detail {

struct Segment {
    double width = 0.0;
    double slope = 0.0;
};

// Lower convex hull of the knot points (z_j, f_j), emitted as consecutive
// segments with nondecreasing slopes. A linear program over per-segment
// allocation variables attains exactly the hull minimum, so the greedy fill
// below solves that LP.
inline void hull_segments(std::span<const double> z, std::span<const double> f,
                          std::vector<Segment>& out) {
    static thread_local std::vector<int> stack;
    stack.clear();
    for (int i = 0; i < static_cast<int>(z.size()); ++i) {
        while (stack.size() >= 2) {
            const int a = stack[stack.size() - 2];
            const int b = stack[stack.size() - 1];
            // pop b if it lies on or above segment a-i
            if ((f[b] - f[a]) * (z[i] - z[a]) >= (f[i] - f[a]) * (z[b] - z[a]) - 1e-15)
                stack.pop_back();
            else
                break;
        }
        stack.push_back(i);
    }
    out.clear();
    for (std::size_t i = 1; i < stack.size(); ++i) {
        const int a = stack[i - 1];
        const int b = stack[i];
        out.push_back({z[b] - z[a], (f[b] - f[a]) / (z[b] - z[a])});
    }
}

}  // namespace detail

/// Inner adversarial minimization of the CVaR Bellman backup:
///
///   min over admissible xi of  sum_i p_i xi_i [r_i + V_i(y xi_i)]
///
/// with V_i given on the budget grid and combined as the piecewise-linear
/// interpolation of z -> z * (r_i + V_i(z)) through the grid knots and the
/// origin (constant extension of V below the smallest grid point makes the
/// origin segment exact). In the substituted variables z_i = y xi_i this is a
/// separable piecewise-linear program with one equality constraint, solved
/// exactly by filling hull segments in ascending slope order.
inline InnerSolution inner_min(std::span<const double> probs, std::span<const double> rewards,
                               std::span<const std::span<const double>> cont_values, double budget,
                               const BudgetGrid& grid, Interp interp = Interp::budget_value) {
    const std::size_t n = probs.size();
    if (rewards.size() != n || cont_values.size() != n)
        throw std::invalid_argument("inner_min: size mismatch");
    double psum = 0.0;
    for (double p : probs) psum += p;
    if (std::abs(psum - 1.0) > 1e-9)
        throw std::invalid_argument("inner_min: probabilities sum to " + std::to_string(psum));
    if (!(budget > 0.0) || budget > 1.0 + 1e-12)
        throw std::invalid_argument("inner_min: budget outside (0,1]");
    const int K = grid.size();
    for (const auto& cv : cont_values)
        if (static_cast<int>(cv.size()) != K)
            throw std::invalid_argument("inner_min: continuation values must live on the grid");

    static thread_local std::vector<double> zs, fs;
    static thread_local std::vector<std::vector<detail::Segment>> segs;
    static thread_local std::vector<detail::Segment> seg_buf;
    if (segs.size() < n) segs.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        zs.clear();
        fs.clear();
        zs.push_back(0.0);
        fs.push_back(0.0);
        if (interp == Interp::budget_value) {
            for (int j = 0; j < K; ++j) {
                zs.push_back(grid.points[j]);
                fs.push_back(grid.points[j] * (rewards[i] + cont_values[i][j]));
            }
        } else {
            // direct-value mode: sample z * (r + V_interp(z)) on a refined set
            // of breakpoints and chord between them
            auto v_at = [&](double z) {
                if (z <= grid.points.front()) return cont_values[i][0];
                if (z >= 1.0) return cont_values[i][K - 1];
                const auto it =
                    std::upper_bound(grid.points.begin(), grid.points.end(), z) - 1;
                const int j = static_cast<int>(it - grid.points.begin());
                const double t = (z - grid.points[j]) / (grid.points[j + 1] - grid.points[j]);
                return (1.0 - t) * cont_values[i][j] + t * cont_values[i][j + 1];
            };
            auto push = [&](double z) {
                zs.push_back(z);
                fs.push_back(z * (rewards[i] + v_at(z)));
            };
            push(grid.points.front());
            for (int j = 0; j + 1 < K; ++j)
                for (int m = 1; m <= 4; ++m)
                    push(grid.points[j] + (grid.points[j + 1] - grid.points[j]) * m / 4.0);
        }
        detail::hull_segments(zs, fs, segs[i]);
    }

    // greedy fill: repeatedly take the cheapest available segment slope
    static thread_local std::vector<std::size_t> cursor;
    static thread_local std::vector<double> z_alloc, used_in_seg;
    cursor.assign(n, 0);
    z_alloc.assign(n, 0.0);
    used_in_seg.assign(n, 0.0);
    double remaining = budget;  // units of sum_i p_i z_i
    double objective = 0.0;
    while (remaining > 1e-15) {
        std::size_t pick = n;
        double best_slope = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (probs[i] <= 0.0 || cursor[i] >= segs[i].size()) continue;
            const double s = segs[i][cursor[i]].slope;
            if (s < best_slope) {
                best_slope = s;
                pick = i;
            }
        }
        if (pick == n) break;  // numerically exhausted; remaining is round-off
        const auto& seg = segs[pick][cursor[pick]];
        const double cap_z = seg.width - used_in_seg[pick];
        const double take_z = std::min(cap_z, remaining / probs[pick]);
        z_alloc[pick] += take_z;
        used_in_seg[pick] += take_z;
        objective += probs[pick] * seg.slope * take_z;
        remaining -= probs[pick] * take_z;
        if (used_in_seg[pick] >= seg.width - 1e-15) {
            ++cursor[pick];
            used_in_seg[pick] = 0.0;
        }
    }

    InnerSolution sol;
    sol.value = objective / budget;
    sol.xi.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        sol.xi.weights[i] = std::min(z_alloc[i] / budget, 1.0 / budget);
    return sol;
}

struct PolicyEntry {
    int action = -1;
    Perturbation xi;  // minimizing perturbation, aligned with the row of `action`
};

struct ViOptions {
    int grid_points = 20;
    Interp interp = Interp::budget_value;
    std::size_t state_cap = 5'000'000;  // (augmented state, grid point) entries
};

/// CVaR value iteration on an explicit MDP (used on the expected MDP).
/// Stage-indexed tables over every state and grid point.
struct MdpVi {
    MdpSpec mdp;
    double alpha = 1.0;
    BudgetGrid grid;
    std::vector<std::vector<double>> value;         // [t][s*K+k], t in 0..H (V_H = 0)
    std::vector<std::vector<PolicyEntry>> policy;   // [t][s*K+k], t in 0..H-1
    double monotonicity_gap = 0.0;                  // worst observed dip of V in y

    int action(int t, int s, double y) const {
        return policy[t][static_cast<std::size_t>(s) * grid.size() + grid.nearest(y)].action;
    }
    const PolicyEntry& entry(int t, int s, int k) const {
        return policy[t][static_cast<std::size_t>(s) * grid.size() + k];
    }
    double value_at(int t, int s, int k) const {
        return value[t][static_cast<std::size_t>(s) * grid.size() + k];
    }
    double root_value() const {
        return value_at(0, mdp.initial_state, grid.index_of(alpha));
    }
};

inline MdpVi solve_mdp(const MdpSpec& mdp, double alpha, const ViOptions& options = {}) {
    const auto report = validate_mdp(mdp);
    if (!report.ok()) throw std::invalid_argument("solve_mdp: invalid MDP: " + report.violations[0]);

    MdpVi out;
    out.mdp = mdp;
    out.alpha = alpha;
    out.grid = BudgetGrid::make(alpha, options.grid_points);
    const int K = out.grid.size();
    const int H = mdp.horizon;
    const std::size_t per_stage = static_cast<std::size_t>(mdp.num_states) * K;
    if (per_stage * (H + 1) > options.state_cap)
        throw std::runtime_error("solve_mdp: table of " + std::to_string(per_stage * (H + 1)) +
                                 " entries exceeds the configured cap");

    out.value.assign(H + 1, std::vector<double>(per_stage, 0.0));
    out.policy.assign(H, std::vector<PolicyEntry>(per_stage));

    std::vector<double> probs, rewards;
    std::vector<std::span<const double>> cont;
    for (int t = H - 1; t >= 0; --t) {
        for (int s = 0; s < mdp.num_states; ++s) {
            for (int k = 0; k < K; ++k) {
                const double y = out.grid.points[k];
                double best = -std::numeric_limits<double>::infinity();
                PolicyEntry best_entry;
                for (int a : mdp.legal[s]) {
                    const auto& row = mdp.row(s, a);
                    probs.clear();
                    rewards.clear();
                    cont.clear();
                    for (const auto& e : row) {
                        probs.push_back(e.prob);
                        rewards.push_back(e.reward);
                        cont.emplace_back(&out.value[t + 1][static_cast<std::size_t>(e.next) * K],
                                          static_cast<std::size_t>(K));
                    }
                    auto sol = inner_min(probs, rewards, cont, y, out.grid, options.interp);
                    if (sol.value > best) {
                        best = sol.value;
                        best_entry.action = a;
                        best_entry.xi = std::move(sol.xi);
                    }
                }
                out.value[t][static_cast<std::size_t>(s) * K + k] = best;
                if (k > 0)
                    out.monotonicity_gap = std::max(
                        out.monotonicity_gap,
                        out.value[t][static_cast<std::size_t>(s) * K + k - 1] - best);
                out.policy[t][static_cast<std::size_t>(s) * K + k] = std::move(best_entry);
            }
        }
    }
    return out;
}

/// Executes a solved EMDP policy in a concrete environment, tracking the
/// confidence factor with the stored minimizing perturbations.
inline TrajectoryRecord execute_policy(const MdpVi& vi, const MdpSpec& env, Rng& rng) {
    if (env.num_states != vi.mdp.num_states || env.num_actions != vi.mdp.num_actions ||
        env.horizon != vi.mdp.horizon)
        throw std::invalid_argument("execute_policy: environment shape mismatch");
    TrajectoryRecord traj;
    int s = env.initial_state;
    double y = vi.alpha;
    for (int t = 0; t < env.horizon; ++t) {
        const int k = vi.grid.nearest(y);
        const auto& entry = vi.entry(t, s, k);
        if (entry.action < 0)
            throw std::runtime_error("execute_policy: no action stored for state " +
                                     std::to_string(s));
        const auto res = step(env, s, entry.action, rng);
        traj.push(s, entry.action, res.next, res.reward);
        // locate the realized successor in the planning model's row
        const auto& row = vi.mdp.row(s, entry.action);
        double xi_realized = 1.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i].next == res.next) {
                xi_realized = entry.xi.weights[i];
                break;
            }
        }
        y = std::min(1.0, std::max(1e-9, y * xi_realized));
        s = res.next;
    }
    return traj;
}

// ---------------------------------------------------------------------------
// CVaR value iteration over the reachable belief-augmented state space.
// Augmented states are (stage, state, observation counts); the reachable set
// is enumerated forward and the backup runs backward.
// ---------------------------------------------------------------------------

struct BamdpVi {
    std::shared_ptr<const BeliefModel> model;
    double alpha = 1.0;
    BudgetGrid grid;

    struct AugKey {
        int state = 0;
        std::vector<std::uint32_t> counts;
        bool operator<(const AugKey& o) const {
            if (state != o.state) return state < o.state;
            return counts < o.counts;
        }
    };
    std::vector<std::map<AugKey, int>> layer_index;  // per stage
    std::vector<std::vector<AugKey>> layer_states;
    std::vector<std::vector<double>> value;          // [t][idx*K+k]
    std::vector<std::vector<PolicyEntry>> policy;
    double monotonicity_gap = 0.0;

    double root_value() const { return value[0][grid.index_of(alpha)]; }

    const PolicyEntry* entry(int t, int state, std::span<const std::uint32_t> counts,
                             int k) const {
        AugKey key{state, {counts.begin(), counts.end()}};
        const auto it = layer_index[t].find(key);
        if (it == layer_index[t].end()) return nullptr;
        return &policy[t][static_cast<std::size_t>(it->second) * grid.size() + k];
    }
};

inline BamdpVi solve_bamdp(const std::shared_ptr<const BeliefModel>& model, double alpha,
                           const ViOptions& options = {}) {
    BamdpVi out;
    out.model = model;
    out.alpha = alpha;
    out.grid = BudgetGrid::make(alpha, options.grid_points);
    const int K = out.grid.size();
    const MdpSpec& base = model->base;
    const int H = base.horizon;

    // forward reachability
    out.layer_index.resize(H + 1);
    out.layer_states.resize(H + 1);
    Belief prior(model);
    BamdpVi::AugKey root{base.initial_state,
                         {prior.counts().begin(), prior.counts().end()}};
    out.layer_index[0][root] = 0;
    out.layer_states[0].push_back(root);
    std::size_t total_entries = static_cast<std::size_t>(K);

    std::vector<TransitionEntry> row;
    for (int t = 0; t < H; ++t) {
        for (const auto& key : out.layer_states[t]) {
            for (int a : base.legal[key.state]) {
                model->predictive_row(key.counts, key.state, a, row);
                for (const auto& e : row) {
                    BamdpVi::AugKey next{e.next, key.counts};
                    const int outcome = model->outcome_of(key.state, a, e.next);
                    if (outcome >= 0)
                        next.counts[model->count_index(
                            model->binding_for(key.state, a)->group, outcome)] += 1;
                    auto [it, inserted] = out.layer_index[t + 1].try_emplace(
                        next, static_cast<int>(out.layer_states[t + 1].size()));
                    if (inserted) {
                        out.layer_states[t + 1].push_back(it->first);
                        total_entries += static_cast<std::size_t>(K);
                        if (total_entries > options.state_cap)
                            throw std::runtime_error(
                                "solve_bamdp: reachable augmented space exceeds cap (" +
                                std::to_string(total_entries) + " entries at stage " +
                                std::to_string(t + 1) + ")");
                    }
                }
            }
        }
    }

    out.value.resize(H + 1);
    out.policy.resize(H);
    out.value[H].assign(out.layer_states[H].size() * K, 0.0);

    std::vector<double> probs, rewards;
    std::vector<std::span<const double>> cont;
    for (int t = H - 1; t >= 0; --t) {
        const auto& states = out.layer_states[t];
        out.value[t].assign(states.size() * K, 0.0);
        out.policy[t].assign(states.size() * K, {});
        for (std::size_t idx = 0; idx < states.size(); ++idx) {
            const auto& key = states[idx];
            for (int k = 0; k < K; ++k) {
                const double y = out.grid.points[k];
                double best = -std::numeric_limits<double>::infinity();
                PolicyEntry best_entry;
                for (int a : base.legal[key.state]) {
                    model->predictive_row(key.counts, key.state, a, row);
                    probs.clear();
                    rewards.clear();
                    cont.clear();
                    for (const auto& e : row) {
                        BamdpVi::AugKey next{e.next, key.counts};
                        const int outcome = model->outcome_of(key.state, a, e.next);
                        if (outcome >= 0)
                            next.counts[model->count_index(
                                model->binding_for(key.state, a)->group, outcome)] += 1;
                        const int nidx = out.layer_index[t + 1].at(next);
                        probs.push_back(e.prob);
                        rewards.push_back(e.reward);
                        cont.emplace_back(
                            &out.value[t + 1][static_cast<std::size_t>(nidx) * K],
                            static_cast<std::size_t>(K));
                    }
                    auto sol = inner_min(probs, rewards, cont, y, out.grid, options.interp);
                    if (sol.value > best) {
                        best = sol.value;
                        best_entry.action = a;
                        best_entry.xi = std::move(sol.xi);
                    }
                }
                out.value[t][idx * K + k] = best;
                if (k > 0)
                    out.monotonicity_gap =
                        std::max(out.monotonicity_gap, out.value[t][idx * K + k - 1] - best);
                out.policy[t][idx * K + k] = std::move(best_entry);
            }
        }
    }
    return out;
}

/// Executes a solved BAMDP policy: the lookup key is (stage, state, counts,
/// nearest grid point), with the belief updated from observed transitions.
inline TrajectoryRecord execute_policy(const BamdpVi& vi, const MdpSpec& env, Rng& rng) {
    TrajectoryRecord traj;
    const MdpSpec& base = vi.model->base;
    if (env.num_states != base.num_states || env.horizon != base.horizon)
        throw std::invalid_argument("execute_policy: environment shape mismatch");
    int s = env.initial_state;
    Belief belief(vi.model);
    double y = vi.alpha;
    std::vector<TransitionEntry> row;
    for (int t = 0; t < env.horizon; ++t) {
        const int k = vi.grid.nearest(y);
        const auto* entry = vi.entry(t, s, belief.counts(), k);
        if (entry == nullptr || entry->action < 0)
            throw std::runtime_error("execute_policy: unreachable augmented state at stage " +
                                     std::to_string(t));
        const auto res = step(env, s, entry->action, rng);
        traj.push(s, entry->action, res.next, res.reward);
        vi.model->predictive_row(belief.counts(), s, entry->action, row);
        double xi_realized = 1.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i].next == res.next) {
                xi_realized = entry->xi.weights[i];
                break;
            }
        }
        belief = belief.observed(s, entry->action, res.next);
        y = std::min(1.0, std::max(1e-9, y * xi_realized));
        s = res.next;
    }
    return traj;
}

}  // namespace cvarplan::vi
