#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "cvarplan/cvar.hpp"
#include "cvarplan/lp.hpp"
#include "support/test_util.hpp"

using namespace cvarplan;

TEST_CASE("empirical VaR picks the matching order statistic", "[cvar]") {
    std::vector<double> samples{9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
    CHECK(empirical_var(samples, 0.2) == 1.0);
    CHECK(empirical_var(samples, 1.0) == 9.0);
    CHECK_THROWS_AS(empirical_var({}, 0.5), std::invalid_argument);

    auto rng = make_rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> xs(1000);
        for (auto& x : xs) x = uniform01(rng) * 100 - 50;
        const double alpha = uniform01(rng) * 0.99 + 0.01;
        auto sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        const auto k = static_cast<std::size_t>(std::ceil(alpha * xs.size() - 1e-12));
        CHECK(empirical_var(xs, alpha) == sorted[k - 1]);
    }
}

TEST_CASE("empirical CVaR averages the worst tail", "[cvar]") {
    std::vector<double> samples{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(empirical_cvar(samples, 0.2) == 0.5);
    CHECK(empirical_cvar(samples, 1.0) == 4.5);
}

TEST_CASE("large-sample empirical CVaR approaches the exact discrete CVaR", "[cvar]") {
    DiscreteDistribution dist;
    dist.outcomes = {{-10, 0.1}, {0, 0.4}, {5, 0.3}, {20, 0.2}};
    const double alpha = 0.25;
    const double exact = exact_cvar(dist, alpha);
    auto rng = make_rng(12);
    const int n = 1000000;
    std::vector<double> samples(n);
    for (auto& s : samples) {
        const std::size_t i = sample_categorical(
            dist.outcomes.size(), 1.0,
            [&dist](std::size_t k) { return dist.outcomes[k].prob; }, rng);
        s = dist.outcomes[i].value;
    }
    CHECK(std::abs(empirical_cvar(samples, alpha) - exact) < 1e-2);
}

TEST_CASE("exact CVaR handles the canonical two-point case", "[cvar]") {
    DiscreteDistribution dist;
    dist.outcomes = {{0, 0.5}, {10, 0.5}};
    CHECK(exact_cvar(dist, 0.5) == Catch::Approx(0.0));

    std::vector<double> values{0, 10};
    const auto env = min_over_envelope(dist, 0.5, values);
    CHECK(env.weights.xi[0] == Catch::Approx(2.0));
    CHECK(env.weights.xi[1] == Catch::Approx(0.0));

    // exhaustive grid over the envelope confirms the minimum
    CHECK(testutil::grid_envelope_min(dist, 0.5) == Catch::Approx(0.0).margin(1e-9));

    // full-confidence CVaR is the expectation
    CHECK(exact_cvar(dist, 1.0) == Catch::Approx(5.0));

    DiscreteDistribution single;
    single.outcomes = {{3.25, 1.0}};
    for (double alpha : {0.01, 0.4, 1.0}) CHECK(exact_cvar(single, alpha) == Catch::Approx(3.25));
}

TEST_CASE("constant values make every feasible weighting optimal", "[cvar]") {
    auto rng = make_rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const auto dist = testutil::random_distribution(rng, 2 + static_cast<int>(uniform_index(rng, 5)));
        std::vector<double> values(dist.outcomes.size(), 7.5);
        const double alpha = uniform01(rng) * 0.9 + 0.05;
        const auto env = min_over_envelope(dist, alpha, values);
        CHECK(env.value == Catch::Approx(7.5));
    }
}

TEST_CASE("envelope weights returned are always feasible", "[cvar]") {
    auto rng = make_rng(21);
    for (int rep = 0; rep < 500; ++rep) {
        const auto dist =
            testutil::random_distribution(rng, 2 + static_cast<int>(uniform_index(rng, 7)));
        const double alpha = uniform01(rng) * 0.99 + 0.01;
        std::vector<double> values(dist.outcomes.size());
        for (auto& v : values) v = uniform01(rng) * 40 - 20;
        const auto env = min_over_envelope(dist, alpha, values);
        double weighted = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            CHECK(env.weights.xi[i] >= -1e-12);
            CHECK(env.weights.xi[i] <= 1.0 / alpha + 1e-9);
            weighted += env.weights.xi[i] * dist.outcomes[i].prob;
        }
        CHECK(weighted == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("CVaR is monotone in the confidence level", "[cvar]") {
    auto rng = make_rng(33);
    for (int rep = 0; rep < 200; ++rep) {
        const auto dist =
            testutil::random_distribution(rng, 2 + static_cast<int>(uniform_index(rng, 7)));
        const double a1 = uniform01(rng) * 0.5 + 0.01;
        const double a2 = a1 + uniform01(rng) * (1.0 - a1);
        CHECK(exact_cvar(dist, a1) <= exact_cvar(dist, a2) + 1e-9);
    }
}

TEST_CASE("coherence spot-checks: translation and positive homogeneity", "[cvar]") {
    auto rng = make_rng(35);
    for (int rep = 0; rep < 100; ++rep) {
        const auto dist =
            testutil::random_distribution(rng, 2 + static_cast<int>(uniform_index(rng, 6)));
        const double alpha = uniform01(rng) * 0.95 + 0.02;
        const double c = uniform01(rng) * 10 - 5;
        const double lambda = uniform01(rng) * 3 + 0.1;
        DiscreteDistribution shifted = dist, scaled = dist;
        for (std::size_t i = 0; i < dist.outcomes.size(); ++i) {
            shifted.outcomes[i].value += c;
            scaled.outcomes[i].value *= lambda;
        }
        CHECK(exact_cvar(shifted, alpha) ==
              Catch::Approx(exact_cvar(dist, alpha) + c).margin(1e-9));
        CHECK(exact_cvar(scaled, alpha) ==
              Catch::Approx(lambda * exact_cvar(dist, alpha)).margin(1e-9));
    }
}

TEST_CASE("greedy envelope minimum agrees with the LP and the grid", "[cvar]") {
    auto rng = make_rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + static_cast<int>(uniform_index(rng, 7));
        const auto dist = testutil::random_distribution(rng, n, 4.0);
        const double alpha = uniform01(rng) * 0.95 + 0.02;
        const double greedy = exact_cvar(dist, alpha);

        std::vector<double> probs(n), values(n);
        for (int i = 0; i < n; ++i) {
            probs[i] = dist.outcomes[i].prob;
            values[i] = dist.outcomes[i].value;
        }
        const auto lp = envelope_lp(probs, values, alpha);
        REQUIRE(lp.feasible);
        CHECK(greedy == Catch::Approx(lp.value).margin(1e-9));

        if (n <= 3) CHECK(greedy == Catch::Approx(testutil::grid_envelope_min(dist, alpha)).margin(1e-2));
    }
}

TEST_CASE("CVaR standard error follows the tail-sample convention", "[cvar]") {
    std::vector<double> samples{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    // tail {0,1}: sd = sqrt(1/2), se = sd / sqrt(2)
    CHECK(empirical_cvar_se(samples, 0.2) == Catch::Approx(std::sqrt(0.5) / std::sqrt(2.0)));
    CHECK(empirical_cvar_se(samples, 0.1) == 0.0);
}
