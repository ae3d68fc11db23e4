#include "qsd/discriminators.hpp"

#include <algorithm>
#include <cmath>

#include "qsd/rng.hpp"

namespace qsd {

namespace {

struct ClassStats {
    std::vector<std::size_t> counts;
    std::vector<IQPoint> means;
    std::vector<double> priors;
};

// Per-class counts, means and priors shared by both fits. Priors default to
// class frequencies; an override must be a valid distribution over d states.
ClassStats class_stats(const Dataset& data, const FitOptions& options,
                       std::size_t min_shots_per_state, const char* op) {
    if (data.empty()) throw InputError(std::string(op) + ": empty dataset");
    const int d = data.dimension;
    if (d < 2) throw InputError(std::string(op) + ": dataset dimension must be >= 2");

    ClassStats st;
    st.counts.assign(static_cast<std::size_t>(d), 0);
    st.means.assign(static_cast<std::size_t>(d), IQPoint{});
    for (std::size_t k = 0; k < data.size(); ++k) {
        const int s = data.labels[k].index;
        if (s < 0 || s >= d) {
            throw InputError(std::string(op) + ": label " + std::to_string(s) +
                             " outside [0, " + std::to_string(d) + ")");
        }
        ++st.counts[static_cast<std::size_t>(s)];
        st.means[static_cast<std::size_t>(s)] =
            st.means[static_cast<std::size_t>(s)] + data.feature(k);
    }
    for (int s = 0; s < d; ++s) {
        const std::size_t n = st.counts[static_cast<std::size_t>(s)];
        if (n < min_shots_per_state) {
            throw InputError(std::string(op) + ": state " + std::to_string(s) +
                             " has " + std::to_string(n) + " shots, needs >= " +
                             std::to_string(min_shots_per_state));
        }
        st.means[static_cast<std::size_t>(s)] =
            (1.0 / static_cast<double>(n)) * st.means[static_cast<std::size_t>(s)];
    }

    if (options.priors.has_value()) {
        const std::vector<double>& p = *options.priors;
        if (static_cast<int>(p.size()) != d) {
            throw ConfigError(std::string(op) + ": prior override has " +
                              std::to_string(p.size()) + " entries, expected " +
                              std::to_string(d));
        }
        double sum = 0.0;
        for (double v : p) {
            if (!(v > 0.0)) throw ConfigError(std::string(op) + ": priors must be positive");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError(std::string(op) + ": priors sum to " + std::to_string(sum));
        }
        st.priors = p;
    } else {
        st.priors.resize(static_cast<std::size_t>(d));
        for (int s = 0; s < d; ++s) {
            st.priors[static_cast<std::size_t>(s)] =
                static_cast<double>(st.counts[static_cast<std::size_t>(s)]) /
                static_cast<double>(data.size());
        }
    }
    return st;
}

// Maximum-likelihood pooled within-class covariance (divides by n). Using the
// same estimator here and in the forced-equal QDA path makes the QDA->LDA
// degeneracy exact.
Cov2 pooled_ml_covariance(const Dataset& data, const ClassStats& st) {
    Cov2 pooled{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < data.size(); ++k) {
        const int s = data.labels[k].index;
        const IQPoint d = data.feature(k) - st.means[static_cast<std::size_t>(s)];
        pooled.ii += d.i * d.i;
        pooled.iq += d.i * d.q;
        pooled.qq += d.q * d.q;
    }
    return (1.0 / static_cast<double>(data.size())) * pooled;
}

Cov2 regularized(Cov2 c, const FitOptions& options) {
    if (options.regularize) {
        c.ii += options.epsilon;
        c.qq += options.epsilon;
    }
    return c;
}

int argmax_lowest_tie(const std::vector<double>& scores) {
    int best = 0;
    for (int s = 1; s < static_cast<int>(scores.size()); ++s) {
        if (scores[static_cast<std::size_t>(s)] > scores[static_cast<std::size_t>(best)]) {
            best = s;
        }
    }
    return best;
}

}  // namespace

LinearDiscriminant fit_lda(const Dataset& data, const FitOptions& options) {
    const ClassStats st = class_stats(data, options, 2, "fit_lda");
    const Cov2 pooled = regularized(pooled_ml_covariance(data, st), options);

    Cov2 inv;
    try {
        inv = pooled.inverse();
    } catch (const NumericalError& e) {
        throw FitError(std::string("fit_lda: pooled covariance is singular (") +
                       e.what() + ")");
    }

    LinearDiscriminant model;
    model.trained_on = dataset_fingerprint(data);
    const int d = data.dimension;
    model.states.resize(static_cast<std::size_t>(d));
    for (int s = 0; s < d; ++s) {
        const IQPoint mu = st.means[static_cast<std::size_t>(s)];
        const IQPoint w{inv.ii * mu.i + inv.iq * mu.q, inv.iq * mu.i + inv.qq * mu.q};
        model.states[static_cast<std::size_t>(s)].w = w;
        model.states[static_cast<std::size_t>(s)].b =
            -0.5 * dot(mu, w) + std::log(st.priors[static_cast<std::size_t>(s)]);
    }
    return model;
}

QuadraticDiscriminant fit_qda(const Dataset& data, const FitOptions& options) {
    const ClassStats st = class_stats(data, options, 3, "fit_qda");
    const int d = data.dimension;

    std::vector<Cov2> covs(static_cast<std::size_t>(d), Cov2{0.0, 0.0, 0.0});
    if (options.force_equal_covariance) {
        const Cov2 pooled = pooled_ml_covariance(data, st);
        std::fill(covs.begin(), covs.end(), pooled);
    } else {
        for (std::size_t k = 0; k < data.size(); ++k) {
            const int s = data.labels[k].index;
            const IQPoint diff = data.feature(k) - st.means[static_cast<std::size_t>(s)];
            Cov2& c = covs[static_cast<std::size_t>(s)];
            c.ii += diff.i * diff.i;
            c.iq += diff.i * diff.q;
            c.qq += diff.q * diff.q;
        }
        for (int s = 0; s < d; ++s) {
            covs[static_cast<std::size_t>(s)] =
                (1.0 / static_cast<double>(st.counts[static_cast<std::size_t>(s)])) *
                covs[static_cast<std::size_t>(s)];
        }
    }

    QuadraticDiscriminant model;
    model.trained_on = dataset_fingerprint(data);
    model.states.resize(static_cast<std::size_t>(d));
    for (int s = 0; s < d; ++s) {
        const Cov2 c = regularized(covs[static_cast<std::size_t>(s)], options);
        QuadraticDiscriminant::StateScore& t = model.states[static_cast<std::size_t>(s)];
        t.mean = st.means[static_cast<std::size_t>(s)];
        try {
            t.inv_cov = c.inverse();
            t.log_det = c.log_det();
        } catch (const NumericalError& e) {
            throw FitError("fit_qda: state " + std::to_string(s) +
                           " covariance is singular (" + e.what() +
                           "); consider the regularize option");
        }
        t.log_prior = std::log(st.priors[static_cast<std::size_t>(s)]);
    }
    return model;
}

StateLabel predict(const LinearDiscriminant& model, IQPoint x) {
    if (!x.finite()) throw InputError("predict: non-finite input point");
    std::vector<double> scores(static_cast<std::size_t>(model.dimension()));
    for (int s = 0; s < model.dimension(); ++s) {
        scores[static_cast<std::size_t>(s)] = model.score(s, x);
    }
    return StateLabel{argmax_lowest_tie(scores)};
}

StateLabel predict(const QuadraticDiscriminant& model, IQPoint x) {
    if (!x.finite()) throw InputError("predict: non-finite input point");
    std::vector<double> scores(static_cast<std::size_t>(model.dimension()));
    for (int s = 0; s < model.dimension(); ++s) {
        scores[static_cast<std::size_t>(s)] = model.score(s, x);
    }
    return StateLabel{argmax_lowest_tie(scores)};
}

std::uint64_t ConfusionMatrix::row_sum(int prepared) const {
    std::uint64_t sum = 0;
    for (int a = 0; a < dimension; ++a) sum += at(prepared, a);
    return sum;
}

double ConfusionMatrix::fidelity() const {
    if (total == 0) return 0.0;
    std::uint64_t diag = 0;
    for (int s = 0; s < dimension; ++s) diag += at(s, s);
    return static_cast<double>(diag) / static_cast<double>(total);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

BayesBoundEstimate bayes_error_analytic(const GaussianStateModel& model) {
    model.validate();
    if (model.dimension() != 2) {
        throw ConfigError("bayes_error_analytic supports only d = 2; use bayes_error_mc");
    }
    if (!model.equal_covariances()) {
        throw ConfigError(
            "bayes_error_analytic requires equal covariances; use bayes_error_mc");
    }
    if (!model.equal_priors()) {
        throw ConfigError("bayes_error_analytic requires equal priors; use bayes_error_mc");
    }
    const double dm = mahalanobis_separation(model, StateLabel{0}, StateLabel{1});
    BayesBoundEstimate est;
    est.error_probability = normal_cdf(-0.5 * dm);
    est.method = BayesMethod::analytic;
    return est;
}

BayesBoundEstimate bayes_error_mc(const GaussianStateModel& model,
                                  std::size_t shots, std::uint64_t seed) {
    model.validate();
    if (shots < 1000) throw InputError("bayes_error_mc needs shots >= 1000");

    const int d = model.dimension();
    struct TrueDensity {
        Cov2 inv;
        double log_norm;  // log prior - 1/2 log|Sigma|
    };
    // Sampling uses the same +1e-12*I regularization as generate_shots so
    // degenerate fixtures stay usable; scoring uses the same matrices.
    const Cov2 eps{1e-12, 0.0, 1e-12};
    std::vector<Chol2> factors;
    std::vector<TrueDensity> densities;
    std::vector<double> cumulative;
    double acc = 0.0;
    for (int s = 0; s < d; ++s) {
        const StateComponent& st = model.states[static_cast<std::size_t>(s)];
        const Cov2 cov = st.covariance + eps;
        factors.push_back(cholesky(cov));
        densities.push_back({cov.inverse(), std::log(st.prior) - 0.5 * cov.log_det()});
        acc += st.prior;
        cumulative.push_back(acc);
    }

    PortableRng rng(derive_seed(seed, StreamTag::bayes_mc, 0));
    std::uint64_t errors = 0;
    std::vector<double> scores(static_cast<std::size_t>(d));
    for (std::size_t n = 0; n < shots; ++n) {
        const double u = rng.uniform01();
        int prepared = d - 1;
        for (int s = 0; s < d; ++s) {
            if (u < cumulative[static_cast<std::size_t>(s)]) {
                prepared = s;
                break;
            }
        }
        const StateComponent& st = model.states[static_cast<std::size_t>(prepared)];
        const auto [z1, z2] = rng.gauss_pair();
        const IQPoint x = st.mean + factors[static_cast<std::size_t>(prepared)].apply(z1, z2);
        for (int s = 0; s < d; ++s) {
            const TrueDensity& t = densities[static_cast<std::size_t>(s)];
            scores[static_cast<std::size_t>(s)] =
                t.log_norm -
                0.5 * mahalanobis_sq(x, model.states[static_cast<std::size_t>(s)].mean, t.inv);
        }
        if (argmax_lowest_tie(scores) != prepared) ++errors;
    }

    BayesBoundEstimate est;
    est.method = BayesMethod::monte_carlo;
    est.mc_shots = shots;
    est.error_probability = static_cast<double>(errors) / static_cast<double>(shots);
    // 99% two-sided normal-approximation binomial interval.
    const double z99 = 2.5758293035489004;
    const double p = est.error_probability;
    est.confidence_halfwidth = z99 * std::sqrt(p * (1.0 - p) / static_cast<double>(shots));
    return est;
}

}  // namespace qsd
