#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace cvarplan {

struct WeightedOutcome {
    double value = 0.0;
    double prob = 0.0;
};

struct DiscreteDistribution {
    std::vector<WeightedOutcome> outcomes;

    void validate() const {
        if (outcomes.empty()) throw std::invalid_argument("distribution has no outcomes");
        double sum = 0.0;
        for (const auto& o : outcomes) {
            if (o.prob < -1e-12) throw std::invalid_argument("distribution has negative probability");
            sum += o.prob;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("distribution probabilities sum to " + std::to_string(sum));
    }
};

/// Density-perturbation weights over the outcomes of a distribution.
/// Feasible for level alpha iff 0 <= xi_i <= 1/alpha and sum xi_i p_i = 1.
struct EnvelopeWeights {
    std::vector<double> xi;
};

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("alpha must lie in (0, 1]");
}

inline std::size_t tail_count(std::size_t n, double alpha) {
    const auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-12));
    return std::max<std::size_t>(1, std::min(n, k));
}

/// Value at risk of an empirical sample: the ceil(alpha*N)-th smallest value.
inline double empirical_var(std::vector<double> samples, double alpha) {
    check_alpha(alpha);
    if (samples.empty()) throw std::invalid_argument("empirical_var: empty sample");
    const std::size_t k = tail_count(samples.size(), alpha);
    std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
    return samples[k - 1];
}

/// Tail average over the ceil(alpha*N) smallest samples.
inline double empirical_cvar(std::vector<double> samples, double alpha) {
    check_alpha(alpha);
    if (samples.empty()) throw std::invalid_argument("empirical_cvar: empty sample");
    const std::size_t k = tail_count(samples.size(), alpha);
    std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
    return std::accumulate(samples.begin(), samples.begin() + k, 0.0) / static_cast<double>(k);
}

/// Standard error convention for reported CVaR estimates: stddev of the tail
/// samples divided by sqrt(tail size).
inline double empirical_cvar_se(std::vector<double> samples, double alpha) {
    check_alpha(alpha);
    if (samples.empty()) throw std::invalid_argument("empirical_cvar_se: empty sample");
    const std::size_t k = tail_count(samples.size(), alpha);
    std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
    const double mean =
        std::accumulate(samples.begin(), samples.begin() + k, 0.0) / static_cast<double>(k);
    if (k == 1) return 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < k; ++i) ss += (samples[i] - mean) * (samples[i] - mean);
    return std::sqrt(ss / static_cast<double>(k - 1)) / std::sqrt(static_cast<double>(k));
}

struct EnvelopeMin {
    double value = 0.0;
    EnvelopeWeights weights;
};

/// Minimizes sum_i xi_i p_i values_i over the risk envelope by greedy filling:
/// the worst outcomes receive weight 1/alpha until probability mass alpha is
/// spent, with a fractional weight on the boundary outcome. Value ties are
/// broken by outcome index.
inline EnvelopeMin min_over_envelope(const DiscreteDistribution& dist, double alpha,
                                     std::span<const double> values) {
    dist.validate();
    check_alpha(alpha);
    if (values.size() != dist.outcomes.size())
        throw std::invalid_argument("min_over_envelope: values size mismatch");

    const std::size_t n = dist.outcomes.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    EnvelopeMin result;
    result.weights.xi.assign(n, 0.0);
    double remaining = alpha;  // probability mass still to be weighted at 1/alpha
    double total = 0.0;
    for (std::size_t i : order) {
        const double p = dist.outcomes[i].prob;
        if (p <= 0.0) continue;
        const double take = std::min(remaining, p);
        if (take <= 0.0) break;
        result.weights.xi[i] = take / (alpha * p);
        total += result.weights.xi[i] * p * values[i];
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    result.value = total;
    return result;
}

/// Exact CVaR of a discrete distribution at level alpha via the dual
/// (risk-envelope) representation.
inline double exact_cvar(const DiscreteDistribution& dist, double alpha) {
    std::vector<double> values(dist.outcomes.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = dist.outcomes[i].value;
    return min_over_envelope(dist, alpha, values).value;
}

inline double sample_mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double sample_mean_se(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    return sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace cvarplan
