// Classical IQ-plane discriminators: LDA, QDA, evaluation metrics, and the
// Bayes-optimal error bound on the Gaussian cluster model.
//
// The minimum-error (Helstrom-style) limit is realized here as the classical
// Bayes error of the known Gaussian state model: no quantum formalism is
// involved, the bound applies to the IQ cluster description itself.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsd/signal_model.hpp"

namespace qsd {

// Per-state linear score w^T x + b; prediction is the argmax over states,
// ties broken by the lowest state index.
struct LinearDiscriminant {
    struct StateScore {
        IQPoint w;       // 1/volt units of IQ
        double b = 0.0;
    };
    std::vector<StateScore> states;
    std::string trained_on;

    int dimension() const { return static_cast<int>(states.size()); }
    double score(int s, IQPoint x) const {
        const StateScore& t = states[static_cast<std::size_t>(s)];
        return dot(t.w, x) + t.b;
    }
};

// Per-state quadratic score
//   g_s(x) = -1/2 (x-mu)^T inv(Sigma) (x-mu) - 1/2 log|Sigma| + log prior.
struct QuadraticDiscriminant {
    struct StateScore {
        IQPoint mean;
        Cov2 inv_cov;
        double log_det = 0.0;
        double log_prior = 0.0;
    };
    std::vector<StateScore> states;
    std::string trained_on;

    int dimension() const { return static_cast<int>(states.size()); }
    double score(int s, IQPoint x) const {
        const StateScore& t = states[static_cast<std::size_t>(s)];
        return -0.5 * mahalanobis_sq(x, t.mean, t.inv_cov) - 0.5 * t.log_det +
               t.log_prior;
    }
};

struct FitOptions {
    // Class priors; empty means estimate from class frequencies.
    std::optional<std::vector<double>> priors;
    // Add epsilon*I to covariance estimates before inversion. Off by default
    // so well-posed fits are untouched; QDA fit errors suggest enabling it.
    bool regularize = false;
    double epsilon = 1e-9;
    // QDA only: replace every per-state covariance with the pooled ML
    // estimate (the one LDA uses), which reduces QDA to LDA exactly.
    bool force_equal_covariance = false;
};

// Pooled-covariance Gaussian fit: w_s = inv(Sigma_pooled) mu_s,
// b_s = -1/2 mu_s^T inv(Sigma_pooled) mu_s + log prior_s. Sigma_pooled is the
// maximum-likelihood pooled within-class covariance (divides by n).
// Trace shots are boxcar-integrated before fitting.
LinearDiscriminant fit_lda(const Dataset& data, const FitOptions& options = {});

// Per-state maximum-likelihood mean/covariance/prior estimates.
QuadraticDiscriminant fit_qda(const Dataset& data, const FitOptions& options = {});

StateLabel predict(const LinearDiscriminant& model, IQPoint x);
StateLabel predict(const QuadraticDiscriminant& model, IQPoint x);

// d x d shot counts, row = prepared state, column = assigned state.
struct ConfusionMatrix {
    int dimension = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    std::uint64_t at(int prepared, int assigned) const {
        return counts[static_cast<std::size_t>(prepared) *
                          static_cast<std::size_t>(dimension) +
                      static_cast<std::size_t>(assigned)];
    }
    std::uint64_t& at(int prepared, int assigned) {
        return counts[static_cast<std::size_t>(prepared) *
                          static_cast<std::size_t>(dimension) +
                      static_cast<std::size_t>(assigned)];
    }
    std::uint64_t row_sum(int prepared) const;
    // Readout fidelity: trace(counts) / total.
    double fidelity() const;
};

// Counts model predictions against prepared labels over the whole dataset.
// Works for any model with a classify_shot overload (LDA, QDA, MLP variants).
template <typename Model>
ConfusionMatrix evaluate(const Model& model, const Dataset& data);

enum class BayesMethod { analytic, monte_carlo };

struct BayesBoundEstimate {
    double error_probability = 0.0;
    BayesMethod method = BayesMethod::analytic;
    std::uint64_t mc_shots = 0;
    double confidence_halfwidth = 0.0;  // 99% binomial half-width (MC only)
};

// Closed form for two equal-covariance, equal-prior states:
// error = Phi(-d_M / 2) with d_M the Mahalanobis separation. Throws
// ConfigError for any other configuration, pointing at bayes_error_mc.
BayesBoundEstimate bayes_error_analytic(const GaussianStateModel& model);

// Draws labeled shots from the model and classifies each with the exact
// posterior argmax under the true densities; the resulting empirical error
// estimates the minimum achievable error for this model.
BayesBoundEstimate bayes_error_mc(const GaussianStateModel& model,
                                  std::size_t shots, std::uint64_t seed);

// Standard normal CDF, computed from std::erfc: Phi(x) = erfc(-x/sqrt(2))/2.
double normal_cdf(double x);

// --- evaluate implementation -------------------------------------------

// Classify shot k of a dataset. Discriminators consume the integrated view.
inline StateLabel classify_shot(const LinearDiscriminant& m, const Dataset& d,
                                std::size_t k) {
    return predict(m, d.feature(k));
}
inline StateLabel classify_shot(const QuadraticDiscriminant& m,
                                const Dataset& d, std::size_t k) {
    return predict(m, d.feature(k));
}

template <typename Model>
ConfusionMatrix evaluate(const Model& model, const Dataset& data) {
    if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
    ConfusionMatrix cm;
    cm.dimension = data.dimension;
    cm.counts.assign(static_cast<std::size_t>(data.dimension) *
                         static_cast<std::size_t>(data.dimension),
                     0);
    for (std::size_t k = 0; k < data.size(); ++k) {
        const int prepared = data.labels[k].index;
        if (prepared < 0 || prepared >= data.dimension) {
            throw InputError("label " + std::to_string(prepared) +
                             " outside [0, " + std::to_string(data.dimension) + ")");
        }
        const StateLabel assigned = classify_shot(model, data, k);
        ++cm.at(prepared, assigned.index);
        ++cm.total;
    }
    return cm;
}

}  // namespace qsd
