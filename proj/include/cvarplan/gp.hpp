#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "cvarplan/game.hpp"
#include "cvarplan/rng.hpp"

namespace cvarplan {

/// Gaussian (squared-exponential) kernel, k(x, x') = exp(-|x - x'|^2 / 2l^2).
inline double gaussian_kernel(std::span<const double> x, std::span<const double> y,
                              double lengthscale) {
    if (x.size() != y.size()) throw std::invalid_argument("kernel: dimension mismatch");
    if (!(lengthscale > 0.0)) throw std::invalid_argument("kernel: lengthscale must be positive");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += d * d;
    }
    return std::exp(-sq / (2.0 * lengthscale * lengthscale));
}

/// Exact Gaussian-process regression with zero prior mean and fixed
/// hyperparameters. Observation noise defaults to variance 1, which keeps the
/// Gram matrix well conditioned; the Cholesky factorization is recomputed
/// lazily after data changes (node-local data stays small under progressive
/// widening, so the cubic refit is cheap).
class GpModel {
public:
    GpModel() = default;
    explicit GpModel(double lengthscale, double noise_var = 1.0)
        : lengthscale_(lengthscale), noise_var_(noise_var) {
        if (!(lengthscale_ > 0.0)) throw std::invalid_argument("GpModel: lengthscale must be positive");
        if (!(noise_var_ > 0.0)) throw std::invalid_argument("GpModel: noise variance must be positive");
    }

    std::size_t size() const { return labels_.size(); }
    double lengthscale() const { return lengthscale_; }

    void add(std::vector<double> input, double label) {
        inputs_.push_back(std::move(input));
        labels_.push_back(label);
        fitted_ = false;
    }

    void set_data(std::vector<std::vector<double>> inputs, std::vector<double> labels) {
        if (inputs.size() != labels.size())
            throw std::invalid_argument("GpModel: inputs/labels size mismatch");
        inputs_ = std::move(inputs);
        labels_ = std::move(labels);
        fitted_ = false;
    }

    void set_label(std::size_t i, double label) {
        labels_[i] = label;
        fitted_ = false;
    }

    const std::vector<std::vector<double>>& inputs() const { return inputs_; }
    const std::vector<double>& labels() const { return labels_; }

    struct Posterior {
        double mean = 0.0;
        double stddev = 1.0;
    };

    Posterior posterior(std::span<const double> x) const {
        const std::size_t n = size();
        if (n == 0) return {0.0, 1.0};
        if (!fitted_) fit();

        kx_.resize(n);
        for (std::size_t i = 0; i < n; ++i) kx_[i] = gaussian_kernel(inputs_[i], x, lengthscale_);

        // v = L^{-1} k_x, solved by forward substitution
        v_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = kx_[i];
            for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * v_[j];
            v_[i] = s / chol_[i * n + i];
        }
        double mean = 0.0;
        double reduction = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += v_[i] * solved_labels_[i];
            reduction += v_[i] * v_[i];
        }
        const double var = std::max(0.0, 1.0 - reduction);  // k(x,x) = 1 for this kernel
        return {mean, std::sqrt(var)};
    }

private:
    void fit() const {
        const std::size_t n = size();
        chol_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = gaussian_kernel(inputs_[i], inputs_[j], lengthscale_);
                if (i == j) s += noise_var_;
                for (std::size_t k = 0; k < j; ++k) s -= chol_[i * n + k] * chol_[j * n + k];
                if (i == j) {
                    if (s <= 0.0) throw std::runtime_error("GpModel: factorization failed");
                    chol_[i * n + i] = std::sqrt(s);
                } else {
                    chol_[i * n + j] = s / chol_[j * n + j];
                }
            }
        }
        // solved_labels = L^{-1} y
        solved_labels_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = labels_[i];
            for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * solved_labels_[j];
            solved_labels_[i] = s / chol_[i * n + i];
        }
        fitted_ = true;
    }

    double lengthscale_ = 1.0;
    double noise_var_ = 1.0;
    std::vector<std::vector<double>> inputs_;
    std::vector<double> labels_;
    mutable bool fitted_ = false;
    mutable std::vector<double> chol_;
    mutable std::vector<double> solved_labels_;
    mutable std::vector<double> kx_;
    mutable std::vector<double> v_;
};

struct AcquisitionConfig {
    double exploration = 2.0;  // weight on the posterior standard deviation
    int num_candidates = 64;
    int num_incumbent_jitter = 8;
};

/// Lower-confidence-bound proposal: the candidate minimizing
/// mean - exploration * stddev over random feasible draws plus jittered
/// copies of the incumbent best input. The sampler must produce admissible
/// perturbations on its own; jittered candidates are passed through repair(),
/// which projects them back into the feasible set or rejects them.
template <typename Sampler, typename Repair>
Perturbation propose(const GpModel& model, Sampler&& sampler, Repair&& repair,
                     const AcquisitionConfig& config, Rng& rng) {
    if (config.num_candidates < 1)
        throw std::invalid_argument("propose: need at least one candidate");

    Perturbation best;
    double best_score = std::numeric_limits<double>::infinity();
    auto consider = [&](Perturbation cand) {
        const auto post = model.posterior(cand.weights);
        const double score = post.mean - config.exploration * post.stddev;
        if (score < best_score) {
            best_score = score;
            best = std::move(cand);
        }
    };

    for (int c = 0; c < config.num_candidates; ++c) consider(sampler());

    if (model.size() > 0 && config.num_incumbent_jitter > 0) {
        std::size_t incumbent = 0;
        for (std::size_t i = 1; i < model.size(); ++i)
            if (model.labels()[i] < model.labels()[incumbent]) incumbent = i;
        const auto& center = model.inputs()[incumbent];
        const double scale = 0.25 * model.lengthscale();
        std::normal_distribution<double> noise(0.0, scale);
        for (int c = 0; c < config.num_incumbent_jitter; ++c) {
            Perturbation cand;
            cand.weights.resize(center.size());
            for (std::size_t i = 0; i < center.size(); ++i)
                cand.weights[i] = std::max(0.0, center[i] + noise(rng));
            if (repair(cand)) consider(std::move(cand));
        }
        Perturbation exact{center};
        if (repair(exact)) consider(std::move(exact));
    }
    return best;
}

}  // namespace cvarplan
