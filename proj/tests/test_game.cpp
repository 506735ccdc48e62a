#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cvarplan/game.hpp"

using namespace cvarplan;

namespace {

AugState betting_root(std::shared_ptr<const BeliefModel> model, double budget) {
    AugState aug;
    aug.state = betting::state_index(0, 10);
    aug.belief = Belief(std::move(model));
    aug.budget = budget;
    aug.turn = Turn::agent;
    return aug;
}

}  // namespace

TEST_CASE("successors expose the posterior predictive support", "[game]") {
    auto model = make_betting_belief({10.0 / 11.0, 1.0 / 11.0});
    const auto aug = betting_root(model, 0.3);

    const auto bet5 = successors(aug, 3);
    REQUIRE(bet5.size() == 2);
    CHECK(bet5[0].prob == Catch::Approx(10.0 / 11.0));
    CHECK(bet5[1].prob == Catch::Approx(1.0 / 11.0));
    CHECK(betting::money_of(bet5[0].next) == 15);
    CHECK(betting::money_of(bet5[1].next) == 5);

    const auto bet0 = successors(aug, 0);
    REQUIRE(bet0.size() == 1);
    CHECK(bet0[0].prob == Catch::Approx(1.0));

    CHECK_THROWS_AS(successors(betting_root(model, 0.3), 99), std::invalid_argument);
}

TEST_CASE("admissibility enforces the cap and the normalization", "[game]") {
    auto model = make_betting_belief({1.0, 1.0});  // predictive (0.5, 0.5)
    const auto aug = betting_root(model, 0.5);
    const auto row = successors(aug, 4);

    CHECK(is_admissible(Perturbation{{1.0, 1.0}}, aug, 4));
    CHECK(is_admissible(Perturbation{{2.0, 0.0}}, aug, 4));
    CHECK_FALSE(is_admissible(Perturbation{{2.2, -0.2}}, aug, 4));
    CHECK_FALSE(is_admissible(Perturbation{{2.5, 0.0}}, aug, 4));  // cap 1/y = 2 and sum > 1
    CHECK_FALSE(is_admissible(Perturbation{{1.5, 1.5}}, aug, 4));  // weighted sum 1.5

    // at full confidence only the identity remains
    const auto aug1 = betting_root(model, 1.0);
    CHECK(is_admissible(Perturbation{{1.0, 1.0}}, aug1, 4));
    CHECK_FALSE(is_admissible(Perturbation{{1.2, 0.8}}, aug1, 4));
    (void)row;
}

TEST_CASE("perturbed transitions reweight, update beliefs, and scale budgets", "[game]") {
    auto model = make_betting_belief({1.0, 1.0});
    const auto aug = betting_root(model, 0.2);

    // identity: distribution equals the predictive row, budget unchanged
    const auto id = perturbed_transition(aug, 4, Perturbation{{1.0, 1.0}});
    REQUIRE(id.size() == 2);
    CHECK(id[0].second == Catch::Approx(0.5));
    CHECK(id[0].first.budget == Catch::Approx(0.2));
    CHECK(id[0].first.belief.counts()[0] == 1);  // win observed on that branch

    // a 1.5x weight scales the successor budget to 0.3
    const auto tilted = perturbed_transition(aug, 4, Perturbation{{1.5, 0.5}});
    CHECK(tilted[0].first.budget == Catch::Approx(0.3));
    CHECK(tilted[0].second == Catch::Approx(0.75));

    // all weight on one successor: single outcome, budget doubled (capped at 1)
    const auto half = betting_root(model, 0.5);
    const auto forced = perturbed_transition(half, 4, Perturbation{{2.0, 0.0}});
    REQUIRE(forced.size() == 1);
    CHECK(forced[0].second == Catch::Approx(1.0));
    CHECK(forced[0].first.budget == Catch::Approx(1.0));

    CHECK_THROWS_AS(perturbed_transition(aug, 4, Perturbation{{9.0, 0.0}}),
                    std::invalid_argument);
}

TEST_CASE("random perturbations are admissible and identity when forced", "[game]") {
    auto model = make_betting_belief({10.0 / 11.0, 1.0 / 11.0});
    auto rng = make_rng(77);

    const auto aug1 = betting_root(model, 1.0);
    const auto row1 = successors(aug1, 4);
    for (int i = 0; i < 10; ++i) {
        const auto xi = random_perturbation(aug1, 4, rng);
        for (double w : xi.weights) CHECK(w == 1.0);
        (void)row1;
    }

    for (int rep = 0; rep < 1000; ++rep) {
        const double budget = 0.01 + uniform01(rng) * 0.98;
        const auto aug = betting_root(model, budget);
        const int action = 1 + static_cast<int>(uniform_index(rng, 4));
        const auto xi = random_perturbation(aug, action, rng);
        CHECK(is_admissible(xi, aug, action));
    }
}

TEST_CASE("random perturbation is symmetric on a symmetric feasible set", "[game]") {
    auto model = make_betting_belief({1.0, 1.0});
    const auto aug = betting_root(model, 0.5);
    auto rng = make_rng(15);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += random_perturbation(aug, 4, rng).weights[0];
    // xi_0 = 2 q with q uniform on [0,1]: mean 1, variance 1/3
    CHECK(std::abs(sum / n - 1.0) < 3.0 * std::sqrt(1.0 / 3.0 / n));
}

TEST_CASE("three-outcome sampler is uniform over the simplex when caps are loose", "[game]") {
    auto cfg = default_grid_road_network();
    auto model = make_road_network_belief(
        cfg, std::vector<DirichletParams>(cfg.road_types.size(), DirichletParams{{1.0, 1.0, 0.4}}));
    AugState aug;
    const auto& edge = cfg.edges[0];
    aug.state = road::state_index(edge.from, 0);
    aug.belief = Belief(model);
    aug.budget = 0.05;  // caps are far outside the simplex
    auto rng = make_rng(5);
    const auto row = successors(aug, edge.action);
    const int n = 100000;
    double mean_q0 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto xi = random_perturbation(aug, edge.action, rng);
        CHECK(is_admissible(xi, aug, edge.action));
        mean_q0 += xi.weights[0] * row[0].prob;
    }
    mean_q0 /= n;
    const double sigma = std::sqrt(1.0 / 18.0 / n);  // Dirichlet(1,1,1) component stddev
    CHECK(std::abs(mean_q0 - 1.0 / 3.0) < 3.0 * sigma);
}

TEST_CASE("tight three-outcome regions are still sampled admissibly", "[game]") {
    auto cfg = default_grid_road_network();
    auto model = make_road_network_belief(
        cfg, std::vector<DirichletParams>(cfg.road_types.size(), DirichletParams{{1.0, 1.0, 0.4}}));
    AugState aug;
    const auto& edge = cfg.edges[0];
    aug.state = road::state_index(edge.from, 0);
    aug.belief = Belief(model);
    auto rng = make_rng(6);
    for (double budget : {0.9, 0.97, 0.999, 0.9999}) {
        aug.budget = budget;
        for (int i = 0; i < 2000; ++i) {
            const auto xi = random_perturbation(aug, edge.action, rng);
            CHECK(is_admissible(xi, aug, edge.action, 1e-7));
        }
    }
}

TEST_CASE("running perturbation products along game paths never exceed the cap", "[game]") {
    auto model = make_betting_belief({10.0 / 11.0, 1.0 / 11.0});
    auto rng = make_rng(41);
    for (int rep = 0; rep < 1000; ++rep) {
        const double alpha = 0.02 + uniform01(rng) * 0.9;
        AugState aug = betting_root(model, alpha);
        double product = 1.0;
        for (int t = 0; t < 6; ++t) {
            const auto& legal = model->base.legal[aug.state];
            const int action = legal[uniform_index(rng, legal.size())];
            const auto xi = random_perturbation(aug, action, rng);
            auto dist = perturbed_transition(aug, action, xi);
            double u = uniform01(rng);
            std::size_t pick = dist.size() - 1;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                u -= dist[i].second;
                if (u < 0) {
                    pick = i;
                    break;
                }
            }
            // the applied weight is the xi entry of the realized successor
            const auto row = successors(aug, action);
            double applied = 1.0;
            for (std::size_t i = 0; i < row.size(); ++i)
                if (row[i].next == dist[pick].first.state) applied = xi.weights[i];
            product *= applied;
            CHECK(product <= 1.0 / alpha + 1e-6);
            aug = dist[pick].first;
        }
    }
}
