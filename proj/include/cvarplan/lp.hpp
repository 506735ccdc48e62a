#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvarplan {

// Small dense linear programming solver used for the risk-envelope and
// value-iteration inner problems. Two-phase primal simplex with Bland's rule;
// problem sizes here are at most a few dozen variables, so no effort is made
// to be sparse or fast.

struct LpRow {
    std::vector<double> coeffs;
    char relation = '=';  // '<', '=', '>'
    double rhs = 0.0;
};

struct LpProblem {
    int num_vars = 0;
    std::vector<double> objective;  // minimized
    std::vector<LpRow> rows;
};

struct LpSolution {
    bool feasible = false;
    bool bounded = true;
    double value = 0.0;
    std::vector<double> x;
};

namespace detail {

inline bool simplex_iterate(std::vector<std::vector<double>>& tab, std::vector<double>& cost,
                            double& offset, std::vector<int>& basis, int allowed_cols) {
    const int m = static_cast<int>(tab.size());
    const int rhs_col = static_cast<int>(tab[0].size()) - 1;
    constexpr double kEps = 1e-11;

    for (int iter = 0; iter < 100000; ++iter) {
        int enter = -1;
        for (int j = 0; j < allowed_cols; ++j) {
            if (cost[j] < -kEps) {
                enter = j;  // Bland: first eligible index
                break;
            }
        }
        if (enter < 0) return true;  // optimal

        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            if (tab[i][enter] > kEps) {
                const double ratio = tab[i][rhs_col] / tab[i][enter];
                if (ratio < best_ratio - kEps ||
                    (ratio < best_ratio + kEps && (leave < 0 || basis[i] < basis[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return false;  // unbounded direction

        const double pivot = tab[leave][enter];
        for (double& v : tab[leave]) v /= pivot;
        for (int i = 0; i < m; ++i) {
            if (i == leave) continue;
            const double f = tab[i][enter];
            if (f == 0.0) continue;
            for (int j = 0; j <= rhs_col; ++j) tab[i][j] -= f * tab[leave][j];
        }
        const double cf = cost[enter];
        if (cf != 0.0) {
            for (int j = 0; j < rhs_col; ++j) cost[j] -= cf * tab[leave][j];
            offset -= cf * tab[leave][rhs_col];
        }
        basis[leave] = enter;
    }
    throw std::runtime_error("simplex failed to terminate");
}

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& problem) {
    const int n = problem.num_vars;
    const int m = static_cast<int>(problem.rows.size());
    if (static_cast<int>(problem.objective.size()) != n)
        throw std::invalid_argument("solve_lp: objective size mismatch");

    // column layout: [0,n) structural, [n, n+slacks) slack/surplus, then artificials
    int num_slack = 0;
    for (const auto& r : problem.rows)
        if (r.relation != '=') ++num_slack;

    std::vector<std::vector<double>> tab(m);
    std::vector<int> basis(m, -1);
    std::vector<int> artificial_of_row(m, -1);
    const int total_cols = n + num_slack + m;  // at most one artificial per row
    int next_slack = n;
    int next_artificial = n + num_slack;
    int num_artificial = 0;

    for (int i = 0; i < m; ++i) {
        const auto& r = problem.rows[i];
        if (static_cast<int>(r.coeffs.size()) != n)
            throw std::invalid_argument("solve_lp: row size mismatch");
        tab[i].assign(total_cols + 1, 0.0);
        const double sign = r.rhs < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) tab[i][j] = sign * r.coeffs[j];
        tab[i][total_cols] = sign * r.rhs;
        char rel = r.relation;
        if (sign < 0.0) rel = (rel == '<') ? '>' : (rel == '>') ? '<' : '=';

        if (rel == '<') {
            tab[i][next_slack] = 1.0;
            basis[i] = next_slack++;
        } else {
            if (rel == '>') {
                tab[i][next_slack] = -1.0;
                ++next_slack;
            }
            tab[i][next_artificial] = 1.0;
            basis[i] = next_artificial;
            artificial_of_row[i] = next_artificial++;
            ++num_artificial;
        }
    }
    const int first_artificial = n + num_slack;

    LpSolution sol;

    // phase 1: minimize the sum of artificials
    if (num_artificial > 0) {
        std::vector<double> cost(total_cols, 0.0);
        double offset = 0.0;
        for (int i = 0; i < m; ++i) {
            if (artificial_of_row[i] < 0) continue;
            for (int j = 0; j < total_cols; ++j)
                if (j != artificial_of_row[i]) cost[j] -= tab[i][j];
            offset -= tab[i][total_cols];
        }
        detail::simplex_iterate(tab, cost, offset, basis, first_artificial);
        if (offset < -1e-7) return sol;  // infeasible (phase-1 optimum = -offset > 0)

        // pivot any remaining artificial out of the basis if possible
        for (int i = 0; i < m; ++i) {
            if (basis[i] < first_artificial) continue;
            int enter = -1;
            for (int j = 0; j < first_artificial; ++j) {
                if (std::abs(tab[i][j]) > 1e-9) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) continue;  // redundant row
            const double pivot = tab[i][enter];
            for (double& v : tab[i]) v /= pivot;
            for (int k = 0; k < m; ++k) {
                if (k == i) continue;
                const double f = tab[k][enter];
                if (f == 0.0) continue;
                for (int j = 0; j <= total_cols; ++j) tab[k][j] -= f * tab[i][j];
            }
            basis[i] = enter;
        }
    }

    // phase 2
    std::vector<double> cost(total_cols, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = problem.objective[j];
    double offset = 0.0;
    for (int i = 0; i < m; ++i) {
        if (basis[i] < 0 || basis[i] >= first_artificial) continue;
        const double cb = cost[basis[i]];
        if (cb == 0.0) continue;
        for (int j = 0; j < total_cols; ++j) cost[j] -= cb * tab[i][j];
        offset -= cb * tab[i][total_cols];
    }
    // exclude artificial columns from entering
    if (!detail::simplex_iterate(tab, cost, offset, basis, first_artificial)) {
        sol.feasible = true;
        sol.bounded = false;
        return sol;
    }

    sol.feasible = true;
    sol.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (basis[i] >= 0 && basis[i] < n) sol.x[basis[i]] = tab[i][total_cols];
    sol.value = 0.0;
    for (int j = 0; j < n; ++j) sol.value += problem.objective[j] * sol.x[j];
    return sol;
}

/// Risk-envelope minimization as an explicit LP:
///   min sum_i values_i p_i xi_i   s.t.  sum_i p_i xi_i = 1,  0 <= xi_i <= 1/alpha.
/// Independent of the greedy route in cvar.hpp; used as a cross-check.
inline LpSolution envelope_lp(std::span<const double> probs, std::span<const double> values,
                              double alpha) {
    if (probs.size() != values.size() || probs.empty())
        throw std::invalid_argument("envelope_lp: size mismatch");
    LpProblem lp;
    lp.num_vars = static_cast<int>(probs.size());
    lp.objective.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) lp.objective[i] = values[i] * probs[i];
    LpRow eq;
    eq.coeffs.assign(probs.begin(), probs.end());
    eq.relation = '=';
    eq.rhs = 1.0;
    lp.rows.push_back(eq);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        LpRow ub;
        ub.coeffs.assign(probs.size(), 0.0);
        ub.coeffs[i] = 1.0;
        ub.relation = '<';
        ub.rhs = 1.0 / alpha;
        lp.rows.push_back(ub);
    }
    return solve_lp(lp);
}

}  // namespace cvarplan
