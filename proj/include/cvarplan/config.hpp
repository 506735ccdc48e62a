#pragma once

#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvarplan/belief.hpp"
#include "cvarplan/cvar_pg.hpp"
#include "cvarplan/cvar_vi.hpp"
#include "cvarplan/domains.hpp"

namespace cvarplan {

using nlohmann::json;

enum class DomainKind { betting, road_network };

/// Parsed domain definition: the environment family plus its prior.
struct DomainConfig {
    DomainKind kind = DomainKind::betting;
    BetaParams betting_prior{10.0 / 11.0, 1.0 / 11.0};
    RoadNetworkConfig road;
    std::vector<DirichletParams> road_priors;
};

/// Runtime bundle for one domain: belief model plus sampling helpers.
struct Domain {
    std::shared_ptr<const BeliefModel> model;
    Belief prior() const { return Belief(model); }
    MdpSpec sample_true(Rng& rng) const { return prior().sample_transition_fn(rng); }
    MdpSpec expected() const { return prior().expected_mdp(); }
};

inline Domain make_domain(const DomainConfig& cfg) {
    Domain d;
    if (cfg.kind == DomainKind::betting) {
        d.model = make_betting_belief(cfg.betting_prior);
    } else {
        d.model = make_road_network_belief(cfg.road, cfg.road_priors);
    }
    return d;
}

inline DomainConfig default_betting_config() {
    DomainConfig cfg;
    cfg.kind = DomainKind::betting;
    cfg.betting_prior = {10.0 / 11.0, 1.0 / 11.0};
    return cfg;
}

inline DomainConfig default_navigation_config() {
    DomainConfig cfg;
    cfg.kind = DomainKind::road_network;
    cfg.road = default_grid_road_network();
    cfg.road_priors.assign(cfg.road.road_types.size(), DirichletParams{{1.0, 1.0, 0.4}});
    return cfg;
}

inline json to_json(const DomainConfig& cfg) {
    json j;
    if (cfg.kind == DomainKind::betting) {
        j["kind"] = "betting";
        j["betting"] = {{"prior_alpha", cfg.betting_prior.alpha},
                        {"prior_beta", cfg.betting_prior.beta}};
        return j;
    }
    j["kind"] = "road_network";
    json rn;
    rn["junctions"] = cfg.road.junctions;
    rn["actions"] = cfg.road.action_names;
    rn["start"] = cfg.road.junctions.at(cfg.road.start);
    rn["goal"] = cfg.road.junctions.at(cfg.road.goal);
    rn["goal_reward"] = cfg.road.goal_reward;
    rn["horizon"] = cfg.road.horizon;
    json types = json::array();
    for (std::size_t t = 0; t < cfg.road.road_types.size(); ++t) {
        const auto& rt = cfg.road.road_types[t];
        types.push_back({{"name", rt.name},
                         {"durations", {rt.durations[0], rt.durations[1], rt.durations[2]}},
                         {"prior", cfg.road_priors.at(t).concentration}});
    }
    rn["road_types"] = types;
    json edges = json::array();
    for (const auto& e : cfg.road.edges) {
        edges.push_back({{"from", cfg.road.junctions.at(e.from)},
                         {"to", cfg.road.junctions.at(e.to)},
                         {"type", cfg.road.road_types.at(e.road_type).name},
                         {"action", cfg.road.action_names.at(e.action)}});
    }
    rn["edges"] = edges;
    j["road_network"] = rn;
    return j;
}

inline DomainConfig domain_config_from_json(const json& j) {
    DomainConfig cfg;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "betting") {
        cfg.kind = DomainKind::betting;
        if (j.contains("betting")) {
            cfg.betting_prior.alpha = j["betting"].value("prior_alpha", cfg.betting_prior.alpha);
            cfg.betting_prior.beta = j["betting"].value("prior_beta", cfg.betting_prior.beta);
        }
        if (!(cfg.betting_prior.alpha > 0.0) || !(cfg.betting_prior.beta > 0.0))
            throw std::invalid_argument("betting prior parameters must be positive");
        return cfg;
    }
    if (kind != "road_network") throw std::invalid_argument("unknown domain kind: " + kind);

    cfg.kind = DomainKind::road_network;
    const auto& rn = j.at("road_network");
    cfg.road.junctions = rn.at("junctions").get<std::vector<std::string>>();
    if (rn.contains("actions"))
        cfg.road.action_names = rn["actions"].get<std::vector<std::string>>();
    auto junction_index = [&cfg](const std::string& name) {
        for (std::size_t i = 0; i < cfg.road.junctions.size(); ++i)
            if (cfg.road.junctions[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown junction: " + name);
    };
    auto action_index = [&cfg](const std::string& name) {
        for (std::size_t i = 0; i < cfg.road.action_names.size(); ++i)
            if (cfg.road.action_names[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown action: " + name);
    };
    cfg.road.start = junction_index(rn.at("start").get<std::string>());
    cfg.road.goal = junction_index(rn.at("goal").get<std::string>());
    cfg.road.goal_reward = rn.value("goal_reward", 80.0);
    cfg.road.horizon = rn.value("horizon", 10);
    for (const auto& t : rn.at("road_types")) {
        RoadType rt;
        rt.name = t.at("name").get<std::string>();
        const auto d = t.at("durations").get<std::vector<double>>();
        if (d.size() != kRoadOutcomes)
            throw std::invalid_argument("road type " + rt.name + " needs three durations");
        for (int k = 0; k < kRoadOutcomes; ++k) rt.durations[k] = d[k];
        cfg.road.road_types.push_back(rt);
        DirichletParams prior;
        prior.concentration = t.at("prior").get<std::vector<double>>();
        cfg.road_priors.push_back(prior);
    }
    auto type_index = [&cfg](const std::string& name) {
        for (std::size_t i = 0; i < cfg.road.road_types.size(); ++i)
            if (cfg.road.road_types[i].name == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown road type: " + name);
    };
    for (const auto& e : rn.at("edges")) {
        RoadEdge edge;
        edge.from = junction_index(e.at("from").get<std::string>());
        edge.to = junction_index(e.at("to").get<std::string>());
        edge.road_type = type_index(e.at("type").get<std::string>());
        edge.action = action_index(e.at("action").get<std::string>());
        cfg.road.edges.push_back(edge);
    }
    validate_road_network(cfg.road);
    return cfg;
}

inline void save_domain_config(const DomainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(cfg).dump(2) << "\n";
}

inline DomainConfig load_domain_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read domain config " + path);
    json j = json::parse(in);
    return domain_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Value-table and policy-parameter serialization
// ---------------------------------------------------------------------------

inline json to_json(const vi::MdpVi& vi_result) {
    json j;
    j["alpha"] = vi_result.alpha;
    j["grid"] = vi_result.grid.points;
    j["horizon"] = vi_result.mdp.horizon;
    j["num_states"] = vi_result.mdp.num_states;
    j["num_actions"] = vi_result.mdp.num_actions;
    j["value"] = vi_result.value;
    json policy = json::array();
    for (const auto& stage : vi_result.policy) {
        json stage_json = json::array();
        for (const auto& entry : stage)
            stage_json.push_back({{"a", entry.action}, {"xi", entry.xi.weights}});
        policy.push_back(std::move(stage_json));
    }
    j["policy"] = policy;
    return j;
}

/// Rebuilds a value table for reuse as a rollout policy. The MDP itself is
/// reconstructed from the domain; only shape data is checked here.
inline void vi_tables_from_json(const json& j, vi::MdpVi& out) {
    out.alpha = j.at("alpha").get<double>();
    out.grid.points = j.at("grid").get<std::vector<double>>();
    out.grid.log_points.clear();
    for (double p : out.grid.points) out.grid.log_points.push_back(std::log(p));
    out.value = j.at("value").get<std::vector<std::vector<double>>>();
    out.policy.clear();
    for (const auto& stage : j.at("policy")) {
        std::vector<vi::PolicyEntry> entries;
        for (const auto& e : stage) {
            vi::PolicyEntry entry;
            entry.action = e.at("a").get<int>();
            entry.xi.weights = e.at("xi").get<std::vector<double>>();
            entries.push_back(std::move(entry));
        }
        out.policy.push_back(std::move(entries));
    }
}

inline void save_vi(const vi::MdpVi& vi_result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(vi_result).dump() << "\n";
}

inline json to_json(const pg::PolicyParams& params) {
    return json{{"num_models", params.num_models},
                {"num_states", params.num_states},
                {"num_actions", params.num_actions},
                {"learning_rate", params.learning_rate},
                {"minibatch_size", params.minibatch_size},
                {"weights", params.weights}};
}

inline pg::PolicyParams pg_params_from_json(const json& j) {
    pg::PolicyParams p;
    p.num_models = j.at("num_models").get<int>();
    p.num_states = j.at("num_states").get<int>();
    p.num_actions = j.at("num_actions").get<int>();
    p.learning_rate = j.value("learning_rate", 0.001);
    p.minibatch_size = j.value("minibatch_size", 1000);
    p.weights = j.at("weights").get<std::vector<double>>();
    if (p.weights.size() !=
        static_cast<std::size_t>(p.num_models) * p.num_states * p.num_actions)
        throw std::invalid_argument("policy parameter file has inconsistent shape");
    return p;
}

}  // namespace cvarplan
