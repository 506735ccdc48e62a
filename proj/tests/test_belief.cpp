#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cvarplan/belief.hpp"
#include "cvarplan/domains.hpp"

using namespace cvarplan;

namespace {

const double kPriorA = 10.0 / 11.0;
const double kPriorB = 1.0 / 11.0;

struct BettingFixture {
    std::shared_ptr<const BeliefModel> model = make_betting_belief({kPriorA, kPriorB});
    int s0 = betting::state_index(0, 10);
    int win1 = betting::state_index(1, 11);
    int lose1 = betting::state_index(1, 9);
};

}  // namespace

TEST_CASE("conjugate update increments the matching outcome count", "[belief]") {
    BettingFixture fx;
    Belief prior(fx.model);
    CHECK(prior.predictive_prob(fx.s0, 1, fx.win1) == Catch::Approx(kPriorA / (kPriorA + kPriorB)));

    const Belief after_win = prior.updated(fx.s0, 1, fx.win1);
    CHECK(after_win.posterior_params(0)[0] == Catch::Approx(kPriorA + 1.0));
    CHECK(after_win.posterior_params(0)[1] == Catch::Approx(kPriorB));
    CHECK(after_win.predictive_prob(fx.s0, 1, fx.win1) == Catch::Approx(21.0 / 22.0));
    // input belief unchanged
    CHECK(prior.counts()[0] == 0);
}

TEST_CASE("updates commute", "[belief]") {
    BettingFixture fx;
    Belief prior(fx.model);
    const Belief wl = prior.updated(fx.s0, 1, fx.win1).updated(fx.s0, 1, fx.lose1);
    const Belief lw = prior.updated(fx.s0, 1, fx.lose1).updated(fx.s0, 1, fx.win1);
    CHECK(wl.counts()[0] == lw.counts()[0]);
    CHECK(wl.counts()[1] == lw.counts()[1]);
}

TEST_CASE("untracked transitions are rejected by update and ignored by observed", "[belief]") {
    BettingFixture fx;
    Belief prior(fx.model);
    const int next0 = betting::state_index(1, 10);
    CHECK_FALSE(prior.tracks(fx.s0, 0));
    CHECK_THROWS_AS(prior.updated(fx.s0, 0, next0), std::invalid_argument);
    const Belief same = prior.observed(fx.s0, 0, next0);
    CHECK(same.counts()[0] == 0);
    CHECK(same.counts()[1] == 0);
}

TEST_CASE("Dirichlet road beliefs follow the shared per-type posterior", "[belief]") {
    auto cfg = default_grid_road_network();
    auto model = make_road_network_belief(
        cfg, std::vector<DirichletParams>(cfg.road_types.size(), DirichletParams{{1.0, 1.0, 0.4}}));
    Belief prior(model);

    // any highway edge has predictive (1/2.4, 1/2.4, 0.4/2.4)
    const auto& edge = cfg.edges[0];
    const int s = road::state_index(edge.from, 0);
    const auto row = prior.predictive_row(s, edge.action);
    REQUIRE(row.size() == 3);
    CHECK(row[0].prob == Catch::Approx(1.0 / 2.4));
    CHECK(row[2].prob == Catch::Approx(0.4 / 2.4));

    // observing slow updates the shared type posterior: (1,1,1.4)
    const Belief after = prior.updated(s, edge.action, row[2].next);
    CHECK(after.posterior_params(edge.road_type)[2] == Catch::Approx(1.4));
    CHECK(after.predictive_prob(s, edge.action, row[2].next) == Catch::Approx(1.4 / 3.4));
}

TEST_CASE("predictive rows always normalize", "[belief]") {
    BettingFixture fx;
    auto rng = make_rng(31);
    Belief b(fx.model);
    for (int rep = 0; rep < 300; ++rep) {
        const int money = 1 + static_cast<int>(uniform_index(rng, 60));
        const int stage = static_cast<int>(uniform_index(rng, 6));
        const int s = betting::state_index(stage, money);
        for (int a : fx.model->base.legal[s]) {
            double sum = 0.0;
            for (const auto& e : b.predictive_row(s, a)) sum += e.prob;
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
        // random walk over the belief
        if (uniform01(rng) < 0.5) b = b.updated(fx.s0, 1, fx.win1);
        else b = b.updated(fx.s0, 1, fx.lose1);
    }
}

TEST_CASE("concentrated posterior sampling pins the parameter", "[belief]") {
    auto model = make_betting_belief({1e9, 1.0});
    Belief prior(model);
    auto rng = make_rng(8);
    const auto mdp = prior.sample_transition_fn(rng);
    const int s0 = betting::state_index(0, 10);
    CHECK(mdp.transition(s0, 4, betting::state_index(1, 20)) == Catch::Approx(1.0).margin(1e-3));
    CHECK(validate_mdp(mdp).ok());
}

TEST_CASE("posterior draws average to the posterior mean", "[belief]") {
    BettingFixture fx;
    Belief prior(fx.model);
    auto rng = make_rng(14);
    const int n = 100000;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        total += prior.sample_transition_fn(rng).transition(fx.s0, 1, fx.win1);
    const double mean = total / n;
    const double expect = kPriorA / (kPriorA + kPriorB);
    const double sigma = std::sqrt(expect * (1 - expect) / 2.0);  // Beta(a,b) stddev, a+b=1
    CHECK(std::abs(mean - expect) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));

    const auto emdp = prior.expected_mdp();
    CHECK(emdp.transition(fx.s0, 1, fx.win1) == Catch::Approx(expect));
    CHECK(validate_mdp(emdp).ok());
}

TEST_CASE("expected MDP tracks slow-only observation streaks", "[belief]") {
    auto cfg = default_grid_road_network();
    auto model = make_road_network_belief(
        cfg, std::vector<DirichletParams>(cfg.road_types.size(), DirichletParams{{1.0, 1.0, 0.4}}));
    Belief b(model);
    const auto& edge = cfg.edges[0];
    const int s = road::state_index(edge.from, 0);
    const int slow_next = b.predictive_row(s, edge.action)[2].next;
    for (int n = 1; n <= 5; ++n) {
        b = b.updated(s, edge.action, slow_next);
        CHECK(b.predictive_prob(s, edge.action, slow_next) ==
              Catch::Approx((0.4 + n) / (2.4 + n)));
    }
}

TEST_CASE("sequential predictive probabilities telescope to the prior integral", "[belief]") {
    // three wins then two losses; the product of one-step posterior
    // predictives must equal the integral of p^3 (1-p)^2 under the prior,
    // here checked against midpoint quadrature of the discretized prior
    BettingFixture fx;
    Belief b(fx.model);
    double product = 1.0;
    for (int i = 0; i < 3; ++i) {
        product *= b.predictive_prob(fx.s0, 1, fx.win1);
        b = b.updated(fx.s0, 1, fx.win1);
    }
    for (int i = 0; i < 2; ++i) {
        product *= b.predictive_prob(fx.s0, 1, fx.lose1);
        b = b.updated(fx.s0, 1, fx.lose1);
    }

    const double log_beta =
        std::lgamma(kPriorA) + std::lgamma(kPriorB) - std::lgamma(kPriorA + kPriorB);
    const int bins = 2000000;
    double integral = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double p = (i + 0.5) / bins;
        integral += std::exp((kPriorA - 1.0 + 3.0) * std::log(p) +
                             (kPriorB - 1.0 + 2.0) * std::log1p(-p) - log_beta);
    }
    integral /= bins;
    CHECK(product == Catch::Approx(integral).epsilon(1e-5));
}
