#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvarplan/rng.hpp"

namespace cvarplan {

/// One entry of a sparse transition row: successor state, its probability,
/// and the reward received on that transition.
struct TransitionEntry {
    int next = 0;
    double prob = 0.0;
    double reward = 0.0;
};

/// Explicit tabular finite-horizon MDP with transition-dependent rewards
/// R(s, a, s'). Immutable after construction; safe to share across workers.
struct MdpSpec {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 1;
    int initial_state = 0;
    std::vector<std::vector<int>> legal;              // per-state legal action lists
    std::vector<std::vector<TransitionEntry>> rows_;  // indexed s * num_actions + a

    const std::vector<TransitionEntry>& row(int s, int a) const {
        return rows_[static_cast<std::size_t>(s) * num_actions + a];
    }
    std::vector<TransitionEntry>& row(int s, int a) {
        return rows_[static_cast<std::size_t>(s) * num_actions + a];
    }

    bool is_legal(int s, int a) const {
        for (int la : legal[s])
            if (la == a) return true;
        return false;
    }

    double transition(int s, int a, int next) const {
        for (const auto& e : row(s, a))
            if (e.next == next) return e.prob;
        return 0.0;
    }

    double reward(int s, int a, int next) const {
        for (const auto& e : row(s, a))
            if (e.next == next) return e.reward;
        return 0.0;
    }

    void resize(int states, int actions) {
        num_states = states;
        num_actions = actions;
        legal.assign(states, {});
        rows_.assign(static_cast<std::size_t>(states) * actions, {});
    }
};

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
    bool ok() const { return violations.empty(); }
    bool empty() const { return violations.empty() && warnings.empty(); }
};

/// Checks row sums, probability ranges, index ranges and basic shape
/// constraints. Unreachable states are reported as warnings, not violations.
inline ValidationReport validate_mdp(const MdpSpec& spec) {
    ValidationReport report;
    auto violation = [&report](const std::string& msg) { report.violations.push_back(msg); };

    if (spec.num_states <= 0) violation("num_states must be positive");
    if (spec.num_actions <= 0) violation("num_actions must be positive");
    if (spec.horizon < 1) violation("horizon must be >= 1");
    if (spec.initial_state < 0 || spec.initial_state >= spec.num_states)
        violation("initial_state out of range");
    if (!report.violations.empty()) return report;

    if (static_cast<int>(spec.legal.size()) != spec.num_states)
        violation("legal_actions list must have one entry per state");
    if (spec.rows_.size() != static_cast<std::size_t>(spec.num_states) * spec.num_actions)
        violation("transition storage has wrong shape");
    if (!report.violations.empty()) return report;

    for (int s = 0; s < spec.num_states; ++s) {
        if (spec.legal[s].empty())
            violation("state " + std::to_string(s) + " has no legal action");
        for (int a : spec.legal[s]) {
            if (a < 0 || a >= spec.num_actions) {
                violation("state " + std::to_string(s) + " lists illegal action index " +
                          std::to_string(a));
                continue;
            }
            double sum = 0.0;
            for (const auto& e : spec.row(s, a)) {
                if (e.next < 0 || e.next >= spec.num_states)
                    violation("transition (" + std::to_string(s) + "," + std::to_string(a) +
                              ") has successor out of range");
                if (e.prob < -1e-12 || e.prob > 1.0 + 1e-12)
                    violation("transition (" + std::to_string(s) + "," + std::to_string(a) +
                              ") has probability outside [0,1]");
                sum += e.prob;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                violation("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                          ") sums to " + std::to_string(sum));
        }
    }

    // reachability sweep from the initial state
    std::vector<char> seen(spec.num_states, 0);
    std::vector<int> stack{spec.initial_state};
    seen[spec.initial_state] = 1;
    while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        for (int a : spec.legal[s]) {
            if (a < 0 || a >= spec.num_actions) continue;
            for (const auto& e : spec.row(s, a)) {
                if (e.next >= 0 && e.next < spec.num_states && e.prob > 0.0 && !seen[e.next]) {
                    seen[e.next] = 1;
                    stack.push_back(e.next);
                }
            }
        }
    }
    int unreachable = 0;
    for (char c : seen)
        if (!c) ++unreachable;
    if (unreachable > 0)
        report.warnings.push_back(std::to_string(unreachable) +
                                  " state(s) unreachable from the initial state");
    return report;
}

struct StepResult {
    int next = 0;
    double reward = 0.0;
};

/// Samples one environment transition. Illegal actions are rejected.
inline StepResult step(const MdpSpec& spec, int s, int a, Rng& rng) {
    if (s < 0 || s >= spec.num_states)
        throw std::invalid_argument("step: state " + std::to_string(s) + " out of range");
    if (!spec.is_legal(s, a))
        throw std::invalid_argument("step: action " + std::to_string(a) +
                                    " is not legal in state " + std::to_string(s));
    const auto& row = spec.row(s, a);
    const std::size_t idx = sample_categorical(
        row.size(), 1.0, [&row](std::size_t i) { return row[i].prob; }, rng);
    return {row[idx].next, row[idx].reward};
}

struct TrajectoryRecord {
    struct Step {
        int state = 0;
        int action = 0;
        int next = 0;
        double reward = 0.0;
    };
    std::vector<Step> steps;
    double total_return = 0.0;

    void push(int s, int a, int next, double reward) {
        steps.push_back({s, a, next, reward});
        total_return += reward;
    }
};

}  // namespace cvarplan
