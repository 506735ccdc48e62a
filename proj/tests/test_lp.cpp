#include <catch2/catch_amalgamated.hpp>

#include "cvarplan/lp.hpp"
#include "cvarplan/rng.hpp"

using namespace cvarplan;

TEST_CASE("simplex solves a simple bounded maximization", "[lp]") {
    // min -x - 2y  s.t.  x + y <= 4, x <= 3, y <= 2, x,y >= 0  -> x=2, y=2
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {-1, -2};
    lp.rows = {{{1, 1}, '<', 4}, {{1, 0}, '<', 3}, {{0, 1}, '<', 2}};
    const auto sol = solve_lp(lp);
    REQUIRE(sol.feasible);
    REQUIRE(sol.bounded);
    CHECK(sol.value == Catch::Approx(-6.0));
    CHECK(sol.x[0] == Catch::Approx(2.0));
    CHECK(sol.x[1] == Catch::Approx(2.0));
}

TEST_CASE("simplex handles equality and >= rows", "[lp]") {
    // min x + y  s.t.  x + y = 2, x >= 0.5  -> value 2
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {1, 1};
    lp.rows = {{{1, 1}, '=', 2}, {{1, 0}, '>', 0.5}};
    const auto sol = solve_lp(lp);
    REQUIRE(sol.feasible);
    CHECK(sol.value == Catch::Approx(2.0));
    CHECK(sol.x[0] >= 0.5 - 1e-9);
}

TEST_CASE("infeasible and unbounded problems are reported", "[lp]") {
    LpProblem infeasible;
    infeasible.num_vars = 1;
    infeasible.objective = {1};
    infeasible.rows = {{{1}, '<', 1}, {{1}, '>', 2}};
    CHECK_FALSE(solve_lp(infeasible).feasible);

    LpProblem unbounded;
    unbounded.num_vars = 1;
    unbounded.objective = {-1};
    unbounded.rows = {{{1}, '>', 1}};
    const auto sol = solve_lp(unbounded);
    CHECK(sol.feasible);
    CHECK_FALSE(sol.bounded);
}

TEST_CASE("negative right-hand sides are normalized correctly", "[lp]") {
    // min x  s.t.  -x <= -3  (x >= 3)
    LpProblem lp;
    lp.num_vars = 1;
    lp.objective = {1};
    lp.rows = {{{-1}, '<', -3}};
    const auto sol = solve_lp(lp);
    REQUIRE(sol.feasible);
    CHECK(sol.value == Catch::Approx(3.0));
}

TEST_CASE("envelope LP collapses to the identity at full confidence", "[lp]") {
    std::vector<double> probs{0.25, 0.25, 0.5};
    std::vector<double> values{-3, 1, 7};
    const auto sol = envelope_lp(probs, values, 1.0);
    REQUIRE(sol.feasible);
    const double mean = -3 * 0.25 + 1 * 0.25 + 7 * 0.5;
    CHECK(sol.value == Catch::Approx(mean).margin(1e-9));
}

TEST_CASE("random degenerate LPs terminate with Bland's rule", "[lp]") {
    auto rng = make_rng(123);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + static_cast<int>(uniform_index(rng, 4));
        LpProblem lp;
        lp.num_vars = n;
        lp.objective.resize(n);
        for (auto& c : lp.objective) c = uniform01(rng) * 2 - 1;
        LpRow eq;
        eq.coeffs.assign(n, 1.0);
        eq.relation = '=';
        eq.rhs = 1.0;
        lp.rows.push_back(eq);
        for (int i = 0; i < n; ++i) {
            LpRow ub;
            ub.coeffs.assign(n, 0.0);
            ub.coeffs[i] = 1.0;
            ub.relation = '<';
            ub.rhs = 0.5 + uniform01(rng);
            lp.rows.push_back(ub);
        }
        const auto sol = solve_lp(lp);
        REQUIRE(sol.feasible);
        REQUIRE(sol.bounded);
        // optimum must match a direct scan over the vertices of this simple polytope:
        // sort by cost and fill greedily (same structure as the envelope problem)
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&lp](int a, int b) { return lp.objective[a] < lp.objective[b]; });
        double remaining = 1.0, expect = 0.0;
        for (int i : order) {
            const double take = std::min(remaining, lp.rows[1 + i].rhs);
            expect += take * lp.objective[i];
            remaining -= take;
        }
        CHECK(sol.value == Catch::Approx(expect).margin(1e-9));
    }
}
