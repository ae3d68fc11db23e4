#include "qsd/signal_model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "qsd/rng.hpp"

namespace qsd {

namespace {

LogLevel read_log_level() {
    const char* env = std::getenv("QSD_LOG");
    if (env == nullptr) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    return LogLevel::error;
}

// Regularization applied before every Cholesky factorization during
// generation; makes zero-covariance (degenerate) fixtures well defined.
constexpr double kGenEpsilon = 1e-12;

}  // namespace

LogLevel log_level() {
    static const LogLevel level = read_log_level();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::fprintf(stderr, "[debug] %s\n", msg.c_str());
}

double Cov2::min_eigenvalue() const {
    // Eigenvalues of [[a, b], [b, c]]: (a+c)/2 -+ sqrt(((a-c)/2)^2 + b^2).
    const double mid = 0.5 * (ii + qq);
    const double rad = std::sqrt(0.25 * (ii - qq) * (ii - qq) + iq * iq);
    return mid - rad;
}

Cov2 Cov2::inverse() const {
    const double d = det();
    if (!std::isfinite(d) || std::abs(d) < 1e-300) {
        throw NumericalError("singular 2x2 covariance (det = " + std::to_string(d) + ")");
    }
    return {qq / d, -iq / d, ii / d};
}

double Cov2::log_det() const {
    const double d = det();
    if (!(d > 0.0)) {
        throw NumericalError("non-positive covariance determinant " + std::to_string(d));
    }
    return std::log(d);
}

Chol2 cholesky(const Cov2& c) {
    if (!(c.ii > 0.0)) {
        throw NumericalError("covariance not positive definite (ii = " +
                             std::to_string(c.ii) + ")");
    }
    Chol2 f;
    f.l11 = std::sqrt(c.ii);
    f.l21 = c.iq / f.l11;
    const double rem = c.qq - f.l21 * f.l21;
    if (!(rem > 0.0)) {
        throw NumericalError("covariance not positive definite (schur = " +
                             std::to_string(rem) + ")");
    }
    f.l22 = std::sqrt(rem);
    return f;
}

void GaussianStateModel::validate() const {
    if (dimension() < 2) {
        throw ModelError("state model needs d >= 2, got d = " +
                         std::to_string(dimension()));
    }
    double prior_sum = 0.0;
    for (int s = 0; s < dimension(); ++s) {
        const StateComponent& c = states[static_cast<std::size_t>(s)];
        if (!c.mean.finite() || !c.covariance.finite() || !std::isfinite(c.prior)) {
            throw ModelError("state " + std::to_string(s) + " has non-finite parameters");
        }
        if (c.prior <= 0.0 || c.prior > 1.0) {
            throw ModelError("state " + std::to_string(s) + " prior " +
                             std::to_string(c.prior) + " outside (0, 1]");
        }
        if (c.covariance.min_eigenvalue() < -1e-12) {
            throw ModelError("state " + std::to_string(s) +
                             " covariance has a negative eigenvalue");
        }
        prior_sum += c.prior;
    }
    if (std::abs(prior_sum - 1.0) > 1e-9) {
        throw ModelError("priors sum to " + std::to_string(prior_sum) + ", expected 1");
    }
}

bool GaussianStateModel::equal_covariances(double tol) const {
    for (std::size_t s = 1; s < states.size(); ++s) {
        const Cov2& a = states[0].covariance;
        const Cov2& b = states[s].covariance;
        if (std::abs(a.ii - b.ii) > tol || std::abs(a.iq - b.iq) > tol ||
            std::abs(a.qq - b.qq) > tol) {
            return false;
        }
    }
    return true;
}

bool GaussianStateModel::equal_priors(double tol) const {
    for (std::size_t s = 1; s < states.size(); ++s) {
        if (std::abs(states[s].prior - states[0].prior) > tol) return false;
    }
    return true;
}

IQPoint Dataset::feature(std::size_t k) const {
    if (mode == ShotMode::integrated) return points[k];
    return integrate_trace(traces[k]);
}

Dataset generate_shots(const GaussianStateModel& model,
                       std::size_t shots_per_state, std::uint64_t seed,
                       const GenerateOptions& options) {
    model.validate();
    if (shots_per_state < 1) {
        throw InputError("shots_per_state must be >= 1");
    }
    if (options.mode == ShotMode::trace && options.trace_length < 1) {
        throw ConfigError("trace_length must be >= 1");
    }
    if (options.mode == ShotMode::trace && !(options.sample_period_ns > 0.0)) {
        throw ConfigError("sample_period_ns must be > 0");
    }

    const int d = model.dimension();
    Dataset out;
    out.mode = options.mode;
    out.dimension = d;
    out.seed = seed;
    out.labels.reserve(shots_per_state * static_cast<std::size_t>(d));

    const Cov2 eps{kGenEpsilon, 0.0, kGenEpsilon};
    for (int s = 0; s < d; ++s) {
        PortableRng rng(derive_seed(seed, StreamTag::gen_state,
                                    static_cast<std::uint64_t>(s)));
        const StateComponent& st = model.states[static_cast<std::size_t>(s)];
        if (options.mode == ShotMode::integrated) {
            const Chol2 factor = cholesky(st.covariance + eps);
            for (std::size_t n = 0; n < shots_per_state; ++n) {
                const auto [z1, z2] = rng.gauss_pair();
                out.points.push_back(st.mean + factor.apply(z1, z2));
                out.labels.push_back(StateLabel{s});
            }
        } else {
            // Per-sample covariance N*Sigma, so the boxcar mean over N
            // samples has covariance Sigma and matches integrated mode.
            const double n_samples = static_cast<double>(options.trace_length);
            const Chol2 factor = cholesky(n_samples * st.covariance + eps);
            for (std::size_t n = 0; n < shots_per_state; ++n) {
                ReadoutTrace trace;
                trace.sample_period_ns = options.sample_period_ns;
                trace.samples.reserve(static_cast<std::size_t>(options.trace_length));
                for (int t = 0; t < options.trace_length; ++t) {
                    const auto [z1, z2] = rng.gauss_pair();
                    trace.samples.push_back(st.mean + factor.apply(z1, z2));
                }
                out.traces.push_back(std::move(trace));
                out.labels.push_back(StateLabel{s});
            }
        }
    }
    return out;
}

IQPoint integrate_trace(const ReadoutTrace& trace) {
    if (trace.samples.empty()) {
        throw InputError("cannot integrate an empty trace");
    }
    IQPoint sum;
    for (const IQPoint& p : trace.samples) sum = sum + p;
    return (1.0 / static_cast<double>(trace.samples.size())) * sum;
}

double mahalanobis_separation(const GaussianStateModel& model, StateLabel a,
                              StateLabel b) {
    model.validate();
    const int d = model.dimension();
    if (a.index < 0 || a.index >= d || b.index < 0 || b.index >= d) {
        throw InputError("state label out of range");
    }
    if (a == b) {
        throw InputError("mahalanobis_separation requires two distinct states");
    }
    const StateComponent& sa = model.states[static_cast<std::size_t>(a.index)];
    const StateComponent& sb = model.states[static_cast<std::size_t>(b.index)];
    const double wa = sa.prior / (sa.prior + sb.prior);
    const Cov2 pooled = wa * sa.covariance + (1.0 - wa) * sb.covariance;
    const Cov2 inv = pooled.inverse();
    return std::sqrt(mahalanobis_sq(sa.mean, sb.mean, inv));
}

std::string dataset_fingerprint(const Dataset& data) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a 64
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t k = 0; k < n; ++k) {
            h ^= bytes[k];
            h *= 0x100000001B3ull;
        }
    };
    const std::uint32_t mode = data.mode == ShotMode::integrated ? 0u : 1u;
    mix_bytes(&mode, sizeof mode);
    mix_bytes(&data.dimension, sizeof data.dimension);
    for (std::size_t k = 0; k < data.size(); ++k) {
        mix_bytes(&data.labels[k].index, sizeof(int));
        const IQPoint p = data.feature(k);
        mix_bytes(&p.i, sizeof(double));
        mix_bytes(&p.q, sizeof(double));
    }
    char buf[2 + 16 + 1];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return std::string(buf);
}

}  // namespace qsd
