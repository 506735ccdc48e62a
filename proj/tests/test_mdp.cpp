#include <catch2/catch_amalgamated.hpp>

#include "cvarplan/domains.hpp"
#include "cvarplan/mdp.hpp"

using namespace cvarplan;

namespace {

MdpSpec two_state_mdp() {
    MdpSpec spec;
    spec.resize(2, 2);
    spec.horizon = 3;
    spec.initial_state = 0;
    spec.legal = {{0, 1}, {0}};
    spec.row(0, 0) = {{0, 0.5, 1.0}, {1, 0.5, 0.0}};
    spec.row(0, 1) = {{1, 1.0, 2.0}};
    spec.row(1, 0) = {{0, 0.25, -1.0}, {1, 0.75, 0.5}};
    return spec;
}

}  // namespace

TEST_CASE("well-formed MDP yields an empty report", "[mdp]") {
    const auto report = validate_mdp(two_state_mdp());
    CHECK(report.ok());
    CHECK(report.empty());
}

TEST_CASE("row-sum violation names the offending state-action", "[mdp]") {
    auto spec = two_state_mdp();
    spec.row(0, 0) = {{0, 0.5, 0.0}, {1, 0.4, 0.0}};
    const auto report = validate_mdp(spec);
    REQUIRE_FALSE(report.ok());
    CHECK(report.violations[0].find("(0,0)") != std::string::npos);
}

TEST_CASE("out-of-range action index is flagged", "[mdp]") {
    auto spec = two_state_mdp();
    spec.legal[1] = {5};
    const auto report = validate_mdp(spec);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations)
        if (v.find("illegal action index") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("unreachable states produce a warning, not a violation", "[mdp]") {
    auto spec = two_state_mdp();
    spec.row(0, 0) = {{0, 1.0, 1.0}};
    spec.row(0, 1) = {{0, 1.0, 2.0}};
    const auto report = validate_mdp(spec);
    CHECK(report.ok());
    REQUIRE_FALSE(report.warnings.empty());
}

TEST_CASE("step follows a deterministic row and rejects illegal actions", "[mdp]") {
    const auto spec = two_state_mdp();
    auto rng = make_rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto res = step(spec, 0, 1, rng);
        CHECK(res.next == 1);
        CHECK(res.reward == 2.0);
    }
    CHECK_THROWS_AS(step(spec, 1, 1, rng), std::invalid_argument);
}

TEST_CASE("step frequencies match the transition row within 3 sigma", "[mdp]") {
    const auto spec = two_state_mdp();
    auto rng = make_rng(11);
    const int n = 100000;
    int count0 = 0;
    for (int i = 0; i < n; ++i)
        if (step(spec, 1, 0, rng).next == 0) ++count0;
    const double p = 0.25;
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(count0) / n - p) < 3 * sigma);
}

TEST_CASE("trajectory total return equals the sum of its step rewards", "[mdp]") {
    const auto spec = two_state_mdp();
    auto rng = make_rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        TrajectoryRecord traj;
        int s = spec.initial_state;
        for (int t = 0; t < spec.horizon; ++t) {
            const int a = spec.legal[s][uniform_index(rng, spec.legal[s].size())];
            const auto res = step(spec, s, a, rng);
            traj.push(s, a, res.next, res.reward);
            s = res.next;
        }
        double total = 0.0;
        for (const auto& st : traj.steps) total += st.reward;
        CHECK(traj.total_return == total);
    }
}

TEST_CASE("betting game structure and validation", "[mdp]") {
    const auto spec = betting_game_mdp(10.0 / 11.0);
    CHECK(spec.num_states == 7 * 71);
    CHECK(spec.horizon == 6);
    const auto report = validate_mdp(spec);
    CHECK(report.ok());

    // a winning 10-unit bet at money 10 pays 10
    auto rng = make_rng(1);
    const auto sure_win = betting_game_mdp(1.0);
    const auto res = step(sure_win, betting::state_index(0, 10), 4, rng);
    CHECK(betting::money_of(res.next) == 20);

    // bets above the current money are illegal
    CHECK_FALSE(spec.is_legal(betting::state_index(0, 4), 4));
    CHECK(spec.is_legal(betting::state_index(0, 4), 2));
}

TEST_CASE("never betting preserves the initial money", "[mdp]") {
    const auto spec = betting_game_mdp(0.3);
    auto rng = make_rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        int s = spec.initial_state;
        double total = 0.0;
        for (int t = 0; t < spec.horizon; ++t) {
            const auto res = step(spec, s, 0, rng);
            total += res.reward;
            s = res.next;
        }
        CHECK(total == 10.0);
    }
}

TEST_CASE("certain loss with maximal bets ruins after the first stage", "[mdp]") {
    const auto spec = betting_game_mdp(0.0);
    auto rng = make_rng(5);
    int s = spec.initial_state;
    double total = 0.0;
    for (int t = 0; t < spec.horizon; ++t) {
        const int bet_max = spec.legal[s].back();  // largest affordable bet
        const auto res = step(spec, s, bet_max, rng);
        total += res.reward;
        s = res.next;
        if (t == 0) CHECK(betting::money_of(s) == 0);
        CHECK(betting::money_of(s) >= 0);
    }
    CHECK(total == 0.0);
}

namespace {

// exhaustive enumeration of the bet-10-whenever-affordable policy
double enumerate_always_bet10(int stage, int money, double p_win) {
    if (stage == betting::kStages) return money;
    if (money < 10) {
        // only the zero bet remains affordable below 10 (money is a multiple of 10 here)
        return enumerate_always_bet10(stage + 1, money, p_win);
    }
    return p_win * enumerate_always_bet10(stage + 1, money + 10, p_win) +
           (1 - p_win) * enumerate_always_bet10(stage + 1, money - 10, p_win);
}

}  // namespace

TEST_CASE("always-bet-10 expected return matches the enumeration oracle", "[mdp]") {
    const double p = 10.0 / 11.0;
    const double oracle = enumerate_always_bet10(0, 10, p);
    CHECK(oracle == Catch::Approx(55.1773266628).epsilon(1e-9));  // frozen from the oracle

    const auto spec = betting_game_mdp(p);
    auto rng = make_rng(17);
    const int n = 100000;
    double total = 0.0;
    for (int e = 0; e < n; ++e) {
        int s = spec.initial_state;
        double ep = 0.0;
        for (int t = 0; t < spec.horizon; ++t) {
            const int a = betting::money_of(s) >= 10 ? 4 : 0;
            const auto res = step(spec, s, a, rng);
            ep += res.reward;
            s = res.next;
        }
        total += ep;
    }
    const double mean = total / n;
    // returns live in [0, 70]; 3-sigma Monte Carlo band with a generous bound on the stddev
    CHECK(std::abs(mean - oracle) < 3.0 * 22.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("road network MDP rewards splice durations and the goal bonus", "[mdp]") {
    RoadNetworkConfig cfg;
    cfg.junctions = {"a", "b", "c"};
    cfg.road_types = {{"highway", {1, 2, 18}}, {"lane", {7, 7, 8}}};
    cfg.edges = {{0, 1, 1, 3}, {1, 2, 0, 3}};  // a -lane-> b -highway-> c(goal)
    cfg.start = 0;
    cfg.goal = 2;
    cfg.horizon = 4;
    const auto spec = road_network_mdp(cfg, {{0.5, 0.3, 0.2}, {0.4, 0.4, 0.2}});
    CHECK(validate_mdp(spec).ok());

    // lane edge (non-goal): rewards take only the values -7 and -8
    const auto& lane_row = spec.row(road::state_index(0, 0), 3);
    for (const auto& e : lane_row) CHECK((e.reward == -7.0 || e.reward == -8.0));

    // highway edge into the goal: fast outcome pays 80 - 1
    const auto& hw_row = spec.row(road::state_index(1, 1), 3);
    CHECK(hw_row[0].reward == 79.0);
    CHECK(hw_row[2].reward == 80.0 - 18.0);
}

TEST_CASE("single deterministic edge to the goal returns bonus minus duration", "[mdp]") {
    RoadNetworkConfig cfg;
    cfg.junctions = {"a", "b"};
    cfg.road_types = {{"street", {4, 5, 11}}};
    cfg.edges = {{0, 1, 0, 3}};
    cfg.start = 0;
    cfg.goal = 1;
    cfg.horizon = 1;
    const auto spec = road_network_mdp(cfg, {{1.0, 0.0, 0.0}});
    auto rng = make_rng(2);
    const auto res = step(spec, spec.initial_state, 3, rng);
    CHECK(res.reward == 80.0 - 4.0);
    CHECK(road::junction_of(res.next) == 1);
}

TEST_CASE("invalid road networks are rejected", "[mdp]") {
    RoadNetworkConfig cfg;
    cfg.junctions = {"a", "b"};
    cfg.road_types = {{"street", {4, 5, 11}}};
    cfg.edges = {{0, 5, 0, 3}};
    cfg.start = 0;
    cfg.goal = 1;
    CHECK_THROWS_AS(validate_road_network(cfg), std::invalid_argument);

    cfg.edges = {{0, 1, 3, 3}};  // unknown road type
    CHECK_THROWS_AS(validate_road_network(cfg), std::invalid_argument);

    cfg.edges = {{1, 0, 0, 2}};  // goal cannot be reached
    CHECK_THROWS_AS(validate_road_network(cfg), std::invalid_argument);
}

TEST_CASE("default benchmark map is valid and its MDP checks out", "[mdp]") {
    const auto cfg = default_grid_road_network();
    validate_road_network(cfg);
    const auto spec = road_network_mdp(
        cfg, std::vector<std::array<double, 3>>(cfg.road_types.size(),
                                                {1.0 / 2.4, 1.0 / 2.4, 0.4 / 2.4}));
    CHECK(validate_mdp(spec).ok());
    CHECK(spec.horizon == 10);
}
