#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cvarplan/config.hpp"
#include "cvarplan/cvar.hpp"
#include "cvarplan/cvar_pg.hpp"
#include "cvarplan/cvar_vi.hpp"
#include "cvarplan/planner.hpp"

namespace cvarplan {

enum class Method { rabamcp, bamcp, cvar_vi_emdp, cvar_vi_bamdp, cvar_pg };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::rabamcp: return "rabamcp";
        case Method::bamcp: return "bamcp";
        case Method::cvar_vi_emdp: return "cvar-vi-emdp";
        case Method::cvar_vi_bamdp: return "cvar-vi-bamdp";
        case Method::cvar_pg: return "cvar-pg";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    for (Method m : {Method::rabamcp, Method::bamcp, Method::cvar_vi_emdp, Method::cvar_vi_bamdp,
                     Method::cvar_pg})
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method: " + name);
}

struct RunConfig {
    DomainConfig domain;
    Method method = Method::rabamcp;
    double alpha = 0.03;
    int episodes = 2000;
    std::uint64_t seed = 1;
    int workers = 1;
    SearchConfig search;
    int grid_points = 20;
    pg::TrainOptions pg;
    std::string pg_params_path;
    std::string debug_dir;
    std::string label;

    void validate() const {
        if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
        check_alpha(alpha);
        if (method == Method::cvar_vi_bamdp && domain.kind != DomainKind::betting)
            throw std::invalid_argument(
                "cvar-vi-bamdp is restricted to betting-scale domains");
    }
};

/// One row of the benchmark table. Wall-clock covers planner compute only:
/// per-episode search time for the MCTS methods, the one-off solve/training
/// time for the value-iteration and policy-gradient methods.
struct MetricsRow {
    std::string label;
    double time_mean = 0.0;
    double time_se = 0.0;
    double cvar003 = 0.0, cvar003_se = 0.0;
    double cvar02 = 0.0, cvar02_se = 0.0;
    double ev = 0.0, ev_se = 0.0;
};

inline MetricsRow make_metrics_row(std::string label, const std::vector<double>& returns,
                                   double time_mean, double time_se) {
    MetricsRow row;
    row.label = std::move(label);
    row.time_mean = time_mean;
    row.time_se = time_se;
    row.cvar003 = empirical_cvar(returns, 0.03);
    row.cvar003_se = empirical_cvar_se(returns, 0.03);
    row.cvar02 = empirical_cvar(returns, 0.2);
    row.cvar02_se = empirical_cvar_se(returns, 0.2);
    row.ev = sample_mean(returns);
    row.ev_se = sample_mean_se(returns);
    if (row.cvar003 > row.cvar02 + 1e-9 || row.cvar02 > row.ev + 1e-9)
        throw std::logic_error("tail-mean monotonicity violated in metrics row");
    return row;
}

struct EvaluationResult {
    MetricsRow row;
    std::vector<double> returns;       // per episode, ordered by episode index
    std::vector<double> plan_seconds;  // per episode planner compute (MCTS methods)
    double setup_seconds = 0.0;        // solve/training time (VI and PG methods)
};

namespace detail {

template <typename EpisodeFn>
void run_episodes(int episodes, int workers, EpisodeFn&& fn) {
    if (workers <= 1) {
        for (int e = 0; e < episodes; ++e) fn(e);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int e = next.fetch_add(1);
                if (e >= episodes) return;
                try {
                    fn(e);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline void write_step_diagnostics(const std::string& dir, int episode,
                                   const std::vector<StepDiagnostics>& steps) {
    std::ofstream out(dir + "/episode_" + std::to_string(episode) + ".json");
    if (!out) return;
    json j = json::array();
    for (const auto& s : steps) {
        json children = json::array();
        for (const auto& c : s.result.root_children)
            children.push_back({{"action", c.action},
                                {"q", c.q},
                                {"visits", c.visits},
                                {"perturbations", c.num_perturbations}});
        j.push_back({{"step", s.step},
                     {"state", s.state},
                     {"budget", s.budget},
                     {"chosen_action", s.result.action},
                     {"chosen_xi", s.result.xi.weights},
                     {"root_visits", s.result.root_visits},
                     {"root_children", children}});
    }
    out << j.dump() << "\n";
}

}  // namespace detail

/// Evaluates one method over prior-sampled ground-truth environments.
/// Episode e uses the generator stream (seed, e), so different methods run
/// against identical environment sequences for paired comparisons.
inline EvaluationResult run_evaluation(const RunConfig& cfg) {
    cfg.validate();
    const Domain domain = make_domain(cfg.domain);
    EvaluationResult result;
    result.returns.assign(cfg.episodes, 0.0);
    result.plan_seconds.assign(cfg.episodes, 0.0);

    const bool is_mcts = cfg.method == Method::rabamcp || cfg.method == Method::bamcp;
    const double alpha = cfg.method == Method::bamcp ? 1.0 : cfg.alpha;

    // shared per-method artifacts
    std::optional<vi::MdpVi> emdp_vi;
    std::optional<vi::BamdpVi> bamdp_vi;
    std::optional<pg::PolicyParams> pg_params;
    std::vector<MdpSpec> pg_models;
    vi::ViOptions vi_options;
    vi_options.grid_points = cfg.grid_points;

    const auto setup_start = std::chrono::steady_clock::now();
    if (is_mcts || cfg.method == Method::cvar_vi_emdp) {
        emdp_vi = vi::solve_mdp(domain.expected(), alpha, vi_options);
    }
    if (cfg.method == Method::cvar_vi_bamdp) {
        bamdp_vi = vi::solve_bamdp(domain.model, alpha, vi_options);
    }
    if (cfg.method == Method::cvar_pg) {
        if (!cfg.pg_params_path.empty()) {
            std::ifstream in(cfg.pg_params_path);
            if (!in) throw std::runtime_error("cannot read " + cfg.pg_params_path);
            json j = json::parse(in);
            pg_params = pg_params_from_json(j);
            const auto train_seed = j.value("train_seed", cfg.seed);
            Rng model_rng = derive_rng(train_seed, 0xA001);
            for (int m = 0; m < pg_params->num_models; ++m)
                pg_models.push_back(domain.prior().sample_transition_fn(model_rng));
        } else {
            pg::TrainOptions options = cfg.pg;
            auto trained = pg::train(domain.model, alpha, options, cfg.seed);
            pg_params = std::move(trained.params);
            pg_models = std::move(trained.models);
        }
    }
    result.setup_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_start).count();

    SearchConfig search = cfg.search;
    search.alpha = alpha;

    detail::run_episodes(cfg.episodes, cfg.workers, [&](int episode) {
        Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(episode));
        const MdpSpec env = domain.sample_true(rng);
        try {
            if (is_mcts) {
                Planner planner(domain.model, search, &*emdp_vi);
                std::vector<StepDiagnostics> steps;
                const auto traj =
                    planner.act_online(env, rng, cfg.debug_dir.empty() ? nullptr : &steps);
                result.returns[episode] = traj.total_return;
                result.plan_seconds[episode] = planner.last_plan_seconds();
                if (!cfg.debug_dir.empty())
                    detail::write_step_diagnostics(cfg.debug_dir, episode, steps);
            } else if (cfg.method == Method::cvar_vi_emdp) {
                result.returns[episode] = vi::execute_policy(*emdp_vi, env, rng).total_return;
            } else if (cfg.method == Method::cvar_vi_bamdp) {
                result.returns[episode] = vi::execute_policy(*bamdp_vi, env, rng).total_return;
            } else {
                result.returns[episode] =
                    pg::simulate_episode(env, pg_models, *pg_params, rng, false).total_return;
            }
        } catch (const std::exception& err) {
            throw std::runtime_error("episode " + std::to_string(episode) + " (seed " +
                                     std::to_string(cfg.seed) + ") failed: " + err.what());
        }
    });

    std::string label = cfg.label.empty()
                            ? method_name(cfg.method) +
                                  (cfg.method == Method::bamcp
                                       ? std::string()
                                       : " (alpha=" + std::to_string(alpha) + ")")
                            : cfg.label;
    double time_mean = 0.0, time_se = 0.0;
    if (is_mcts) {
        time_mean = sample_mean(result.plan_seconds);
        time_se = sample_mean_se(result.plan_seconds);
    } else {
        time_mean = result.setup_seconds;
    }
    result.row = make_metrics_row(std::move(label), result.returns, time_mean, time_se);
    return result;
}

/// Bayesian-optimization expansion vs. random expansion at doubled budget
/// (the matched-compute convention); identical episode seeds for pairing.
inline std::pair<EvaluationResult, EvaluationResult> ablation_random_expansion(
    const RunConfig& cfg) {
    if (cfg.method != Method::rabamcp)
        throw std::invalid_argument("ablation requires method=rabamcp");
    RunConfig bo = cfg;
    bo.search.expansion = SearchConfig::Expansion::bayesopt;
    bo.label = "rabamcp bo (alpha=" + std::to_string(cfg.alpha) + ")";
    RunConfig random = cfg;
    random.search.expansion = SearchConfig::Expansion::random;
    random.search.sims_initial = 2 * cfg.search.sims_initial;
    random.search.sims_step = 2 * cfg.search.sims_step;
    random.label = "rabamcp random-expansion 2x-sims (alpha=" + std::to_string(cfg.alpha) + ")";
    return {run_evaluation(bo), run_evaluation(random)};
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline void export_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,time_mean_s,time_se_s,cvar_003,cvar_003_se,cvar_02,cvar_02_se,ev,ev_se\n";
    for (const auto& r : rows) {
        out << '"' << r.label << '"' << ',' << r.time_mean << ',' << r.time_se << ','
            << r.cvar003 << ',' << r.cvar003_se << ',' << r.cvar02 << ',' << r.cvar02_se << ','
            << r.ev << ',' << r.ev_se << "\n";
    }
}

inline void export_returns_csv(const std::string& path, const std::vector<double>& returns) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "episode,return\n";
    for (std::size_t i = 0; i < returns.size(); ++i) out << i << ',' << returns[i] << "\n";
}

inline std::vector<double> import_returns_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> returns;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        returns.push_back(std::stod(line.substr(comma + 1)));
    }
    return returns;
}

inline json metrics_to_json(const MetricsRow& r) {
    return json{{"method", r.label},
                {"time_mean_s", r.time_mean},
                {"time_se_s", r.time_se},
                {"cvar_003", r.cvar003},
                {"cvar_003_se", r.cvar003_se},
                {"cvar_02", r.cvar02},
                {"cvar_02_se", r.cvar02_se},
                {"ev", r.ev},
                {"ev_se", r.ev_se}};
}

inline void export_run_json(const std::string& path, const json& run_config,
                            const std::vector<MetricsRow>& rows) {
    json j;
    j["config"] = run_config;
    j["metrics"] = json::array();
    for (const auto& r : rows) j["metrics"].push_back(metrics_to_json(r));
    j["environment"] = {{"compiler", std::string("gcc ") + __VERSION__},
                        {"build_date", __DATE__}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Paired statistics used by the benchmark properties
// ---------------------------------------------------------------------------

namespace stats {

/// Regularized incomplete beta by continued fraction; used for the Student-t tail.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    auto contfrac = [](double a_, double b_, double x_) {
        const int max_iter = 300;
        const double eps = 1e-14;
        double c = 1.0, d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
        if (std::abs(d) < 1e-30) d = 1e-30;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= max_iter; ++m) {
            const int m2 = 2 * m;
            double num = m * (b_ - m) * x_ / ((a_ + m2 - 1.0) * (a_ + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < 1e-30) d = 1e-30;
            c = 1.0 + num / c;
            if (std::abs(c) < 1e-30) c = 1e-30;
            d = 1.0 / d;
            h *= d * c;
            num = -(a_ + m) * (a_ + b_ + m) * x_ / ((a_ + m2) * (a_ + m2 + 1.0));
            d = 1.0 + num * d;
            if (std::abs(d) < 1e-30) d = 1e-30;
            c = 1.0 + num / c;
            if (std::abs(c) < 1e-30) c = 1e-30;
            d = 1.0 / d;
            const double delta = d * c;
            h *= delta;
            if (std::abs(delta - 1.0) < eps) break;
        }
        return h;
    };
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * contfrac(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     contfrac(b, a, 1.0 - x) / b;
}

inline double student_t_sf(double t, double dof) {
    // one-sided survival function P(T > t)
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

/// One-sided paired t-test for mean(differences) > 0; returns the p-value.
inline double paired_t_pvalue(const std::vector<double>& differences) {
    const std::size_t n = differences.size();
    if (n < 2) return 1.0;
    const double mean = sample_mean(differences);
    const double se = sample_mean_se(differences);
    if (se == 0.0) return mean > 0.0 ? 0.0 : 1.0;
    return student_t_sf(mean / se, static_cast<double>(n - 1));
}

/// Per-block CVaR estimates over consecutive episode blocks, preserving the
/// pairing between runs that used the same episode seeds.
inline std::vector<double> block_cvar(const std::vector<double>& returns, double alpha,
                                      int num_blocks) {
    const std::size_t block = returns.size() / num_blocks;
    std::vector<double> out;
    for (int b = 0; b < num_blocks; ++b) {
        std::vector<double> chunk(returns.begin() + b * block,
                                  returns.begin() + (b + 1) * block);
        out.push_back(empirical_cvar(chunk, alpha));
    }
    return out;
}

}  // namespace stats

}  // namespace cvarplan
