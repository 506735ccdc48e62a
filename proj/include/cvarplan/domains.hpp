#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvarplan/mdp.hpp"

namespace cvarplan {

// ---------------------------------------------------------------------------
// Betting game: start with 10 units, six betting stages, menu {0,1,2,5,10},
// win adds the stake and loss removes it, final wealth is paid out after the
// last stage. States are (stage, money) pairs.
// ---------------------------------------------------------------------------

namespace betting {

inline constexpr int kStages = 6;
inline constexpr int kStartMoney = 10;
inline constexpr int kMoneyCap = 70;  // 10 + 6 * max bet; exact upper bound for this menu
inline constexpr std::array<int, 5> kBets = {0, 1, 2, 5, 10};

inline int state_index(int stage, int money) { return stage * (kMoneyCap + 1) + money; }
inline int stage_of(int state) { return state / (kMoneyCap + 1); }
inline int money_of(int state) { return state % (kMoneyCap + 1); }
inline constexpr int num_states() { return (kStages + 1) * (kMoneyCap + 1); }

}  // namespace betting

/// Builds the betting-game MDP for a concrete win probability.
inline MdpSpec betting_game_mdp(double p_win) {
    if (p_win < 0.0 || p_win > 1.0)
        throw std::invalid_argument("betting_game_mdp: p_win must lie in [0,1]");

    MdpSpec spec;
    spec.resize(betting::num_states(), static_cast<int>(betting::kBets.size()));
    spec.horizon = betting::kStages;
    spec.initial_state = betting::state_index(0, betting::kStartMoney);

    for (int stage = 0; stage <= betting::kStages; ++stage) {
        for (int money = 0; money <= betting::kMoneyCap; ++money) {
            const int s = betting::state_index(stage, money);
            if (stage == betting::kStages) {
                // past the last stage; absorbing and never stepped within the horizon
                spec.legal[s] = {0};
                spec.row(s, 0) = {{s, 1.0, 0.0}};
                continue;
            }
            for (int a = 0; a < static_cast<int>(betting::kBets.size()); ++a) {
                const int bet = betting::kBets[a];
                if (bet > money) continue;  // sufficient money required
                // the cap binds only at unreachable (stage, money) pairs
                if (money + bet > betting::kMoneyCap) continue;
                spec.legal[s].push_back(a);
                const bool final_stage = (stage + 1 == betting::kStages);
                auto payout = [final_stage](int next_money) {
                    return final_stage ? static_cast<double>(next_money) : 0.0;
                };
                auto& row = spec.row(s, a);
                if (bet == 0) {
                    const int next = betting::state_index(stage + 1, money);
                    row = {{next, 1.0, payout(money)}};
                } else {
                    const int win = betting::state_index(stage + 1, money + bet);
                    const int lose = betting::state_index(stage + 1, money - bet);
                    row = {{win, p_win, payout(money + bet)},
                           {lose, 1.0 - p_win, payout(money - bet)}};
                }
            }
        }
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Road-network navigation: junctions connected by typed road segments. Each
// traversal draws one of three outcomes (fast/medium/slow) whose duration
// depends on the road type; reward is -duration, plus a bonus on reaching the
// goal. The goal junction is absorbing.
//
// States encode (junction, arrival outcome) so that the realized outcome is
// observable from the successor state: index = junction * 4 + arrival, with
// arrival 0 meaning "initial / not via a typed road" and 1..3 the outcome.
// ---------------------------------------------------------------------------

inline constexpr int kRoadOutcomes = 3;

struct RoadType {
    std::string name;
    std::array<double, kRoadOutcomes> durations{};  // fast, medium, slow
};

struct RoadEdge {
    int from = 0;
    int to = 0;
    int road_type = 0;
    int action = 0;  // direction index into RoadNetworkConfig::action_names
};

struct RoadNetworkConfig {
    std::vector<std::string> junctions;
    std::vector<std::string> action_names = {"up", "down", "left", "right"};
    std::vector<RoadType> road_types;
    std::vector<RoadEdge> edges;
    int start = 0;
    int goal = 0;
    double goal_reward = 80.0;
    int horizon = 10;
};

namespace road {

inline int state_index(int junction, int arrival) { return junction * 4 + arrival; }
inline int junction_of(int state) { return state / 4; }
inline int arrival_of(int state) { return state % 4; }

}  // namespace road

inline void validate_road_network(const RoadNetworkConfig& cfg) {
    const int num_junctions = static_cast<int>(cfg.junctions.size());
    if (num_junctions == 0) throw std::invalid_argument("road network: no junctions");
    if (cfg.road_types.empty()) throw std::invalid_argument("road network: no road types");
    if (cfg.start < 0 || cfg.start >= num_junctions)
        throw std::invalid_argument("road network: start junction out of range");
    if (cfg.goal < 0 || cfg.goal >= num_junctions)
        throw std::invalid_argument("road network: goal junction out of range");
    if (cfg.horizon < 1) throw std::invalid_argument("road network: horizon must be >= 1");

    std::vector<std::vector<char>> used(num_junctions,
                                        std::vector<char>(cfg.action_names.size(), 0));
    for (const auto& e : cfg.edges) {
        if (e.from < 0 || e.from >= num_junctions || e.to < 0 || e.to >= num_junctions)
            throw std::invalid_argument("road network: edge references unknown junction");
        if (e.road_type < 0 || e.road_type >= static_cast<int>(cfg.road_types.size()))
            throw std::invalid_argument("road network: edge references unknown road type");
        if (e.action < 0 || e.action >= static_cast<int>(cfg.action_names.size()))
            throw std::invalid_argument("road network: edge references unknown action");
        if (used[e.from][e.action])
            throw std::invalid_argument("road network: duplicate action " +
                                        cfg.action_names[e.action] + " at junction " +
                                        cfg.junctions[e.from]);
        used[e.from][e.action] = 1;
    }

    // goal must be reachable from start
    std::vector<char> seen(num_junctions, 0);
    std::vector<int> stack{cfg.start};
    seen[cfg.start] = 1;
    while (!stack.empty()) {
        const int j = stack.back();
        stack.pop_back();
        for (const auto& e : cfg.edges) {
            if (e.from == j && !seen[e.to]) {
                seen[e.to] = 1;
                stack.push_back(e.to);
            }
        }
    }
    if (!seen[cfg.goal])
        throw std::invalid_argument("road network: goal is not reachable from start");
}

/// Builds the navigation MDP for concrete per-road-type outcome probabilities.
inline MdpSpec road_network_mdp(const RoadNetworkConfig& cfg,
                                const std::vector<std::array<double, kRoadOutcomes>>& outcome_probs) {
    validate_road_network(cfg);
    if (outcome_probs.size() != cfg.road_types.size())
        throw std::invalid_argument("road_network_mdp: one probability triple per road type required");
    for (const auto& p : outcome_probs) {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) throw std::invalid_argument("road_network_mdp: negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("road_network_mdp: outcome probabilities must sum to 1");
    }

    const int num_junctions = static_cast<int>(cfg.junctions.size());
    MdpSpec spec;
    spec.resize(num_junctions * 4, static_cast<int>(cfg.action_names.size()));
    spec.horizon = cfg.horizon;
    spec.initial_state = road::state_index(cfg.start, 0);

    for (int j = 0; j < num_junctions; ++j) {
        for (int arrival = 0; arrival < 4; ++arrival) {
            const int s = road::state_index(j, arrival);
            if (j == cfg.goal) {
                spec.legal[s] = {0};
                spec.row(s, 0) = {{s, 1.0, 0.0}};
                continue;
            }
            for (const auto& e : cfg.edges) {
                if (e.from != j) continue;
                spec.legal[s].push_back(e.action);
                auto& row = spec.row(s, e.action);
                const auto& type = cfg.road_types[e.road_type];
                const double bonus = (e.to == cfg.goal) ? cfg.goal_reward : 0.0;
                for (int k = 0; k < kRoadOutcomes; ++k) {
                    row.push_back({road::state_index(e.to, 1 + k), outcome_probs[e.road_type][k],
                                   bonus - type.durations[k]});
                }
            }
            if (spec.legal[s].empty()) {
                // dead end; absorbing with no reward (the shipped maps have none)
                spec.legal[s] = {0};
                spec.row(s, 0) = {{s, 1.0, 0.0}};
            } else {
                std::sort(spec.legal[s].begin(), spec.legal[s].end());
            }
        }
    }
    return spec;
}

/// Default benchmark map: a 5x5 grid. The north/east rim is highway (fast in
/// expectation, heavy slow tail), the west/south rim is lane (slow, almost no
/// tail), and the interior mixes main roads (horizontal) and streets
/// (vertical) so that intermediate risk profiles are available.
inline RoadNetworkConfig default_grid_road_network() {
    RoadNetworkConfig cfg;
    const int n = 5;
    cfg.junctions.reserve(n * n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) cfg.junctions.push_back("j" + std::to_string(r) + std::to_string(c));
    cfg.road_types = {
        {"highway", {1.0, 2.0, 18.0}},
        {"main_road", {2.0, 4.0, 13.0}},
        {"street", {4.0, 5.0, 11.0}},
        {"lane", {7.0, 7.0, 8.0}},
    };
    cfg.start = 0;           // j00, north-west corner
    cfg.goal = n * n - 1;    // j44, south-east corner
    cfg.goal_reward = 80.0;
    cfg.horizon = 10;

    const int kHighway = 0, kMain = 1, kStreet = 2, kLane = 3;
    auto idx = [n](int r, int c) { return r * n + c; };
    // actions: 0 = up (r-1), 1 = down (r+1), 2 = left (c-1), 3 = right (c+1)
    auto connect = [&cfg, idx](int r1, int c1, int r2, int c2, int type) {
        int forward, backward;
        if (r1 == r2) {
            forward = c2 > c1 ? 3 : 2;
            backward = c2 > c1 ? 2 : 3;
        } else {
            forward = r2 > r1 ? 1 : 0;
            backward = r2 > r1 ? 0 : 1;
        }
        cfg.edges.push_back({idx(r1, c1), idx(r2, c2), type, forward});
        cfg.edges.push_back({idx(r2, c2), idx(r1, c1), type, backward});
    };

    for (int c = 0; c + 1 < n; ++c) connect(0, c, 0, c + 1, kHighway);   // north rim
    for (int r = 0; r + 1 < n; ++r) connect(r, n - 1, r + 1, n - 1, kHighway);  // east rim
    for (int r = 0; r + 1 < n; ++r) connect(r, 0, r + 1, 0, kLane);      // west rim
    for (int c = 0; c + 1 < n; ++c) connect(n - 1, c, n - 1, c + 1, kLane);     // south rim
    for (int r = 1; r + 1 < n; ++r)                                      // interior horizontals
        for (int c = 0; c + 1 < n; ++c) connect(r, c, r, c + 1, kMain);
    for (int c = 1; c + 1 < n; ++c)                                      // interior verticals
        for (int r = 0; r + 1 < n; ++r) connect(r, c, r + 1, c, kStreet);

    return cfg;
}

}  // namespace cvarplan
