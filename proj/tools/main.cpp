#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cvarplan/config.hpp"
#include "cvarplan/eval.hpp"
#include "cvarplan/oracle.hpp"

namespace {

using namespace cvarplan;

void print_row(const MetricsRow& row) {
    std::printf("%-48s time %9.3f (%.3f)  cvar003 %8.2f (%.2f)  cvar02 %8.2f (%.2f)  ev %8.2f (%.2f)\n",
                row.label.c_str(), row.time_mean, row.time_se, row.cvar003, row.cvar003_se,
                row.cvar02, row.cvar02_se, row.ev, row.ev_se);
}

struct CommonFlags {
    std::string domain_path;
    std::string run_config_path;
    std::string method = "rabamcp";
    double alpha = 0.03;
    int episodes = 2000;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_prefix;
    std::string debug_dir;
    double c_mcts = 2.0;
    double c_bo = 2.0;
    double tau = 0.2;
    int sims_initial = 100000;
    int sims_step = 25000;
    std::string expansion_mode = "bayesopt";
    double explore_kick = 0.01;
    int grid_points = 20;
    std::string pg_params;
    std::int64_t pg_sims = 2'000'000;
    double pg_lr = 0.001;

    void attach(CLI::App* cmd, bool with_method) {
        cmd->add_option("--domain", domain_path, "domain configuration file (JSON)");
        cmd->add_option("--config", run_config_path,
                        "run configuration file (JSON); explicit flags take precedence");
        if (with_method)
            cmd->add_option("--method", method,
                            "rabamcp|bamcp|cvar-vi-emdp|cvar-vi-bamdp|cvar-pg");
        cmd->add_option("--alpha", alpha, "confidence level");
        cmd->add_option("--episodes", episodes, "evaluation episodes");
        cmd->add_option("--seed", seed, "base seed; episode e uses stream (seed, e)");
        cmd->add_option("--workers", workers, "concurrent episode workers");
        cmd->add_option("--out", out_prefix, "output prefix for CSV/JSON exports");
        cmd->add_option("--debug-dir", debug_dir, "write per-step planner diagnostics here");
        cmd->add_option("--c-mcts", c_mcts, "UCB exploration constant");
        cmd->add_option("--c-bo", c_bo, "GP acquisition exploration constant");
        cmd->add_option("--tau", tau, "progressive widening exponent");
        cmd->add_option("--sims-initial", sims_initial, "simulations for the first step");
        cmd->add_option("--sims-step", sims_step, "simulations per later step");
        cmd->add_option("--expansion-mode", expansion_mode, "bayesopt|random");
        cmd->add_option("--explore-kick", explore_kick,
                        "probability of a forced least-visited descent");
        cmd->add_option("--grid-points", grid_points, "confidence grid size for value iteration");
        cmd->add_option("--pg-params", pg_params, "trained policy parameters (JSON)");
        cmd->add_option("--pg-sims", pg_sims, "policy-gradient training simulations");
        cmd->add_option("--pg-lr", pg_lr, "policy-gradient learning rate");
    }

    RunConfig to_run_config(const CLI::App& cmd) const {
        RunConfig cfg;
        // precedence: defaults < config file < explicit flags
        if (!run_config_path.empty()) {
            std::ifstream in(run_config_path);
            if (!in) throw std::runtime_error("cannot read " + run_config_path);
            json j = json::parse(in);
            if (j.contains("domain")) cfg.domain = domain_config_from_json(j["domain"]);
            cfg.method = parse_method(j.value("method", method_name(cfg.method)));
            cfg.alpha = j.value("alpha", cfg.alpha);
            cfg.episodes = j.value("episodes", cfg.episodes);
            cfg.seed = j.value("seed", cfg.seed);
            cfg.workers = j.value("workers", cfg.workers);
            cfg.grid_points = j.value("grid_points", cfg.grid_points);
            cfg.search.c_mcts = j.value("c_mcts", cfg.search.c_mcts);
            cfg.search.c_bo = j.value("c_bo", cfg.search.c_bo);
            cfg.search.tau = j.value("tau", cfg.search.tau);
            cfg.search.sims_initial = j.value("sims_initial", cfg.search.sims_initial);
            cfg.search.sims_step = j.value("sims_step", cfg.search.sims_step);
            cfg.search.explore_kick = j.value("explore_kick", cfg.search.explore_kick);
            if (j.value("expansion_mode", "bayesopt") == std::string("random"))
                cfg.search.expansion = SearchConfig::Expansion::random;
            cfg.pg.total_sims = j.value("pg_sims", cfg.pg.total_sims);
            cfg.pg.learning_rate = j.value("pg_lr", cfg.pg.learning_rate);
            cfg.pg_params_path = j.value("pg_params", cfg.pg_params_path);
        }
        auto given = [&cmd](const std::string& flag) {
            const auto* opt = cmd.get_option_no_throw(flag);
            return opt != nullptr && opt->count() > 0;
        };
        if (given("--domain") || run_config_path.empty()) {
            cfg.domain = domain_path.empty() ? default_betting_config()
                                             : load_domain_config(domain_path);
        }
        if (given("--method")) cfg.method = parse_method(method);
        if (given("--alpha")) cfg.alpha = alpha;
        if (given("--episodes")) cfg.episodes = episodes;
        if (given("--seed")) cfg.seed = seed;
        if (given("--workers")) cfg.workers = workers;
        if (given("--grid-points")) cfg.grid_points = grid_points;
        if (given("--c-mcts")) cfg.search.c_mcts = c_mcts;
        if (given("--c-bo")) cfg.search.c_bo = c_bo;
        if (given("--tau")) cfg.search.tau = tau;
        if (given("--sims-initial")) cfg.search.sims_initial = sims_initial;
        if (given("--sims-step")) cfg.search.sims_step = sims_step;
        if (given("--expansion-mode"))
            cfg.search.expansion = expansion_mode == "random"
                                       ? SearchConfig::Expansion::random
                                       : SearchConfig::Expansion::bayesopt;
        if (given("--explore-kick")) cfg.search.explore_kick = explore_kick;
        if (given("--pg-params")) cfg.pg_params_path = pg_params;
        if (given("--pg-sims")) cfg.pg.total_sims = pg_sims;
        if (given("--pg-lr")) cfg.pg.learning_rate = pg_lr;
        cfg.debug_dir = debug_dir;
        cfg.search.seed = cfg.seed;
        return cfg;
    }

    json flags_json(const RunConfig& cfg) const {
        return json{{"method", method_name(cfg.method)},
                    {"alpha", cfg.alpha},
                    {"episodes", cfg.episodes},
                    {"seed", cfg.seed},
                    {"workers", cfg.workers},
                    {"grid_points", cfg.grid_points},
                    {"c_mcts", cfg.search.c_mcts},
                    {"c_bo", cfg.search.c_bo},
                    {"tau", cfg.search.tau},
                    {"sims_initial", cfg.search.sims_initial},
                    {"sims_step", cfg.search.sims_step},
                    {"expansion_mode",
                     cfg.search.expansion == SearchConfig::Expansion::random ? "random"
                                                                             : "bayesopt"},
                    {"domain", to_json(cfg.domain)}};
    }
};

int cmd_evaluate(const CommonFlags& flags, const CLI::App& cmd) {
    RunConfig cfg = flags.to_run_config(cmd);
    auto result = run_evaluation(cfg);
    print_row(result.row);
    if (!flags.out_prefix.empty()) {
        export_metrics_csv(flags.out_prefix + "_metrics.csv", {result.row});
        export_returns_csv(flags.out_prefix + "_returns.csv", result.returns);
        export_run_json(flags.out_prefix + "_run.json", flags.flags_json(cfg), {result.row});
    }
    return 0;
}

int cmd_ablation(const CommonFlags& flags, const CLI::App& cmd) {
    RunConfig cfg = flags.to_run_config(cmd);
    cfg.method = Method::rabamcp;
    auto [bo, random] = ablation_random_expansion(cfg);
    print_row(bo.row);
    print_row(random.row);
    if (!flags.out_prefix.empty()) {
        export_metrics_csv(flags.out_prefix + "_metrics.csv", {bo.row, random.row});
        export_returns_csv(flags.out_prefix + "_returns_bo.csv", bo.returns);
        export_returns_csv(flags.out_prefix + "_returns_random.csv", random.returns);
        export_run_json(flags.out_prefix + "_run.json", flags.flags_json(cfg),
                        {bo.row, random.row});
    }
    return 0;
}

int cmd_vi_solve(const CommonFlags& flags, const CLI::App& cmd, const std::string& target,
                 const std::string& out_path) {
    RunConfig cfg = flags.to_run_config(cmd);
    const Domain domain = make_domain(cfg.domain);
    vi::ViOptions options;
    options.grid_points = cfg.grid_points;
    if (target == "emdp") {
        auto solved = vi::solve_mdp(domain.expected(), cfg.alpha, options);
        std::printf("emdp root value at alpha=%g: %.6f (monotonicity gap %.2e)\n", cfg.alpha,
                    solved.root_value(), solved.monotonicity_gap);
        if (!out_path.empty()) save_vi(solved, out_path);
    } else if (target == "bamdp") {
        auto solved = vi::solve_bamdp(domain.model, cfg.alpha, options);
        std::printf("bamdp root value at alpha=%g: %.6f (monotonicity gap %.2e)\n", cfg.alpha,
                    solved.root_value(), solved.monotonicity_gap);
    } else {
        throw std::invalid_argument("vi-solve target must be emdp or bamdp");
    }
    return 0;
}

int cmd_pg_train(const CommonFlags& flags, const CLI::App& cmd, const std::string& out_path,
                 const std::string& curve_path) {
    RunConfig cfg = flags.to_run_config(cmd);
    const Domain domain = make_domain(cfg.domain);
    pg::TrainOptions options = cfg.pg;
    auto result = pg::train(domain.model, cfg.alpha, options, cfg.seed);
    std::printf("trained %lld simulations; final evaluated cvar(alpha=%g) = %.3f (%.3f)\n",
                static_cast<long long>(options.total_sims), cfg.alpha, result.curve.back().cvar,
                result.curve.back().se);
    if (!out_path.empty()) {
        json j = to_json(result.params);
        j["train_seed"] = cfg.seed;
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << j.dump() << "\n";
    }
    if (!curve_path.empty()) {
        std::ofstream out(curve_path);
        if (!out) throw std::runtime_error("cannot write " + curve_path);
        out << "sims,cvar,se\n";
        for (const auto& p : result.curve)
            out << p.sims << ',' << p.cvar << ',' << p.se << "\n";
    }
    return 0;
}

int cmd_oracle() {
    const auto micro = oracle::micro_instance();
    std::printf("micro-instance equivalence checks (2 states, 2 actions, horizon 2):\n");
    for (double alpha : {0.1, 0.3, 1.0}) {
        const double policies = oracle::best_policy_cvar(micro, alpha);
        const double game = oracle::game_value(micro, alpha, 201);
        const double perturbed = oracle::best_perturbed_prior_value(micro, alpha, 101);
        std::printf(
            "  alpha=%.2f  policy-enumeration cvar %.4f | game value %.4f | perturbed prior "
            "%.4f\n",
            alpha, policies, game, perturbed);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-averse Bayes-adaptive planning toolkit"};
    app.require_subcommand(1);

    CommonFlags ev_flags, ab_flags, vi_flags, pg_flags;
    auto* evaluate = app.add_subcommand("evaluate", "evaluate one method over sampled environments");
    ev_flags.attach(evaluate, true);
    auto* ablation = app.add_subcommand("ablation", "BO-expansion vs random-expansion comparison");
    ab_flags.attach(ablation, false);
    auto* vi_solve = app.add_subcommand("vi-solve", "run CVaR value iteration");
    vi_flags.attach(vi_solve, false);
    std::string vi_target = "emdp", vi_out;
    vi_solve->add_option("--target", vi_target, "emdp|bamdp");
    vi_solve->add_option("--vi-out", vi_out, "write the solved tables (JSON)");
    auto* pg_train = app.add_subcommand("pg-train", "train the CVaR policy-gradient baseline");
    pg_flags.attach(pg_train, false);
    std::string pg_out, pg_curve;
    pg_train->add_option("--params-out", pg_out, "write trained parameters (JSON)");
    pg_train->add_option("--curve-out", pg_curve, "write the training curve (CSV)");
    auto* oracle_cmd =
        app.add_subcommand("oracle", "run the brute-force micro-instance equivalence checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (evaluate->parsed()) return cmd_evaluate(ev_flags, *evaluate);
        if (ablation->parsed()) return cmd_ablation(ab_flags, *ablation);
        if (vi_solve->parsed()) return cmd_vi_solve(vi_flags, *vi_solve, vi_target, vi_out);
        if (pg_train->parsed()) return cmd_pg_train(pg_flags, *pg_train, pg_out, pg_curve);
        if (oracle_cmd->parsed()) return cmd_oracle();
    } catch (const std::exception& err) {
        nlohmann::json j{{"error", err.what()}};
        std::cerr << j.dump() << "\n";
        return 1;
    }
    return 0;
}
