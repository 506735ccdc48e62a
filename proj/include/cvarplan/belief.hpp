#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvarplan/domains.hpp"
#include "cvarplan/mdp.hpp"
#include "cvarplan/rng.hpp"

namespace cvarplan {

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;
};

struct DirichletParams {
    std::vector<double> concentration;
};

enum class PriorFamily { beta, dirichlet };

/// One latent event group: a Beta or Dirichlet prior over outcome
/// probabilities, shared by every transition row bound to it.
struct EventGroup {
    std::string name;
    PriorFamily family = PriorFamily::dirichlet;
    std::vector<double> prior;  // concentration per outcome; Beta is the 2-outcome case
};

/// Binds one (s, a) row to an event group: outcome k of the group leads to
/// successor_per_outcome[k]. Rows without a binding have known probabilities.
struct RowBinding {
    int group = 0;
    std::vector<int> successor_per_outcome;
};

/// Immutable description of a Bayes-adaptive domain: the base MDP (structure,
/// rewards, known transition rows), the latent event groups, and the binding
/// of uncertain rows to groups. Shared by all Belief values of the domain.
struct BeliefModel {
    MdpSpec base;
    std::vector<EventGroup> groups;
    std::vector<std::optional<RowBinding>> binding;  // indexed s * num_actions + a
    std::vector<int> group_offset;                   // into the flattened counts vector
    int total_outcomes = 0;

    void finalize() {
        group_offset.resize(groups.size());
        int off = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            group_offset[g] = off;
            off += static_cast<int>(groups[g].prior.size());
            for (double c : groups[g].prior)
                if (!(c > 0.0))
                    throw std::invalid_argument("prior concentrations must be positive");
        }
        total_outcomes = off;
        if (binding.size() != static_cast<std::size_t>(base.num_states) * base.num_actions)
            throw std::invalid_argument("belief model binding has wrong shape");
    }

    const std::optional<RowBinding>& binding_for(int s, int a) const {
        return binding[static_cast<std::size_t>(s) * base.num_actions + a];
    }

    int count_index(int group, int outcome) const { return group_offset[group] + outcome; }

    double posterior_mean(std::span<const std::uint32_t> counts, int group, int outcome) const {
        const auto& g = groups[group];
        double total = 0.0;
        for (std::size_t k = 0; k < g.prior.size(); ++k)
            total += g.prior[k] + counts[group_offset[group] + k];
        return (g.prior[outcome] + counts[group_offset[group] + outcome]) / total;
    }

    /// Posterior predictive transition row for (s, a) given observation counts.
    void predictive_row(std::span<const std::uint32_t> counts, int s, int a,
                        std::vector<TransitionEntry>& out) const {
        const auto& b = binding_for(s, a);
        const auto& known = base.row(s, a);
        if (!b) {
            out = known;
            return;
        }
        out.clear();
        const auto& g = groups[b->group];
        double total = 0.0;
        for (std::size_t k = 0; k < g.prior.size(); ++k)
            total += g.prior[k] + counts[group_offset[b->group] + k];
        for (std::size_t k = 0; k < g.prior.size(); ++k) {
            const int next = b->successor_per_outcome[k];
            const double p = (g.prior[k] + counts[group_offset[b->group] + k]) / total;
            out.push_back({next, p, base.reward(s, a, next)});
        }
    }

    /// Index of the group outcome observed by transition (s, a, s'), or -1 if
    /// the row is not bound to a latent group.
    int outcome_of(int s, int a, int next) const {
        const auto& b = binding_for(s, a);
        if (!b) return -1;
        for (std::size_t k = 0; k < b->successor_per_outcome.size(); ++k)
            if (b->successor_per_outcome[k] == next) return static_cast<int>(k);
        throw std::invalid_argument("transition (" + std::to_string(s) + "," + std::to_string(a) +
                                    "," + std::to_string(next) +
                                    ") is not a supported outcome of its event group");
    }
};

/// Conjugate posterior over the unknown transition function, represented by
/// observation counts on top of the shared model. Values are immutable;
/// updates return fresh values.
class Belief {
public:
    Belief() = default;
    explicit Belief(std::shared_ptr<const BeliefModel> model)
        : model_(std::move(model)), counts_(model_->total_outcomes, 0) {}
    Belief(std::shared_ptr<const BeliefModel> model, std::vector<std::uint32_t> counts)
        : model_(std::move(model)), counts_(std::move(counts)) {}

    const BeliefModel& model() const { return *model_; }
    const std::shared_ptr<const BeliefModel>& model_ptr() const { return model_; }
    std::span<const std::uint32_t> counts() const { return counts_; }

    bool tracks(int s, int a) const { return model_->binding_for(s, a).has_value(); }

    /// Bayes update for an observed transition; rejects transitions that are
    /// not bound to a latent event group.
    Belief updated(int s, int a, int next) const {
        const int outcome = model_->outcome_of(s, a, next);
        if (outcome < 0)
            throw std::invalid_argument("update: transition (" + std::to_string(s) + "," +
                                        std::to_string(a) + "," + std::to_string(next) +
                                        ") is not tracked by the belief");
        Belief out(*this);
        out.counts_[model_->count_index(model_->binding_for(s, a)->group, outcome)] += 1;
        return out;
    }

    /// Like updated(), but transitions with known probabilities pass through
    /// unchanged. Used on observed environment transitions.
    Belief observed(int s, int a, int next) const {
        if (!tracks(s, a)) return *this;
        return updated(s, a, next);
    }

    double predictive_prob(int s, int a, int next) const {
        const auto& b = model_->binding_for(s, a);
        if (!b) return model_->base.transition(s, a, next);
        double p = 0.0;
        for (std::size_t k = 0; k < b->successor_per_outcome.size(); ++k)
            if (b->successor_per_outcome[k] == next)
                p += model_->posterior_mean(counts_, b->group, static_cast<int>(k));
        return p;
    }

    std::vector<TransitionEntry> predictive_row(int s, int a) const {
        std::vector<TransitionEntry> out;
        model_->predictive_row(counts_, s, a, out);
        return out;
    }

    /// Posterior parameters (prior + counts) of one event group.
    std::vector<double> posterior_params(int group) const {
        const auto& g = model_->groups[group];
        std::vector<double> out(g.prior);
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] += counts_[model_->group_offset[group] + k];
        return out;
    }

    /// Draws a concrete transition function from the posterior and
    /// instantiates it as an MdpSpec.
    MdpSpec sample_transition_fn(Rng& rng) const {
        std::vector<std::vector<double>> theta(model_->groups.size());
        for (std::size_t g = 0; g < model_->groups.size(); ++g) {
            const auto params = posterior_params(static_cast<int>(g));
            theta[g].resize(params.size());
            dirichlet_sample(params, theta[g], rng);
        }
        return instantiate(theta);
    }

    /// The expected MDP: transition probabilities set to posterior means.
    MdpSpec expected_mdp() const {
        std::vector<std::vector<double>> theta(model_->groups.size());
        for (std::size_t g = 0; g < model_->groups.size(); ++g) {
            const auto params = posterior_params(static_cast<int>(g));
            double total = 0.0;
            for (double v : params) total += v;
            theta[g].resize(params.size());
            for (std::size_t k = 0; k < params.size(); ++k) theta[g][k] = params[k] / total;
        }
        return instantiate(theta);
    }

private:
    MdpSpec instantiate(const std::vector<std::vector<double>>& theta) const {
        MdpSpec out = model_->base;
        for (int s = 0; s < out.num_states; ++s) {
            for (int a : out.legal[s]) {
                const auto& b = model_->binding_for(s, a);
                if (!b) continue;
                auto& row = out.row(s, a);
                row.clear();
                for (std::size_t k = 0; k < b->successor_per_outcome.size(); ++k) {
                    const int next = b->successor_per_outcome[k];
                    row.push_back({next, theta[b->group][k], model_->base.reward(s, a, next)});
                }
            }
        }
        return out;
    }

    std::shared_ptr<const BeliefModel> model_;
    std::vector<std::uint32_t> counts_;
};

/// Betting-game belief: a single Beta-distributed win probability shared by
/// every bet size.
inline std::shared_ptr<const BeliefModel> make_betting_belief(const BetaParams& prior) {
    auto model = std::make_shared<BeliefModel>();
    const double mean = prior.alpha / (prior.alpha + prior.beta);
    model->base = betting_game_mdp(mean);
    model->groups = {{"game", PriorFamily::beta, {prior.alpha, prior.beta}}};
    model->binding.assign(
        static_cast<std::size_t>(model->base.num_states) * model->base.num_actions, std::nullopt);
    for (int s = 0; s < model->base.num_states; ++s) {
        if (betting::stage_of(s) >= betting::kStages) continue;
        const int money = betting::money_of(s);
        for (int a : model->base.legal[s]) {
            const int bet = betting::kBets[a];
            if (bet == 0) continue;
            const int stage = betting::stage_of(s);
            model->binding[static_cast<std::size_t>(s) * model->base.num_actions + a] =
                RowBinding{0,
                           {betting::state_index(stage + 1, money + bet),
                            betting::state_index(stage + 1, money - bet)}};
        }
    }
    model->finalize();
    return model;
}

/// Navigation belief: one Dirichlet per road type, shared by all edges of
/// that type.
inline std::shared_ptr<const BeliefModel> make_road_network_belief(
    const RoadNetworkConfig& cfg, const std::vector<DirichletParams>& priors) {
    if (priors.size() != cfg.road_types.size())
        throw std::invalid_argument("one Dirichlet prior per road type required");
    auto model = std::make_shared<BeliefModel>();
    std::vector<std::array<double, kRoadOutcomes>> means(priors.size());
    for (std::size_t t = 0; t < priors.size(); ++t) {
        if (priors[t].concentration.size() != kRoadOutcomes)
            throw std::invalid_argument("road-type priors must have three outcomes");
        double total = 0.0;
        for (double c : priors[t].concentration) total += c;
        for (int k = 0; k < kRoadOutcomes; ++k) means[t][k] = priors[t].concentration[k] / total;
    }
    model->base = road_network_mdp(cfg, means);
    model->groups.resize(priors.size());
    for (std::size_t t = 0; t < priors.size(); ++t)
        model->groups[t] = {cfg.road_types[t].name, PriorFamily::dirichlet,
                            priors[t].concentration};
    model->binding.assign(
        static_cast<std::size_t>(model->base.num_states) * model->base.num_actions, std::nullopt);
    for (const auto& e : cfg.edges) {
        for (int arrival = 0; arrival < 4; ++arrival) {
            const int s = road::state_index(e.from, arrival);
            if (e.from == cfg.goal) continue;
            RowBinding b;
            b.group = e.road_type;
            for (int k = 0; k < kRoadOutcomes; ++k)
                b.successor_per_outcome.push_back(road::state_index(e.to, 1 + k));
            model->binding[static_cast<std::size_t>(s) * model->base.num_actions + e.action] = b;
        }
    }
    model->finalize();
    return model;
}

}  // namespace cvarplan
