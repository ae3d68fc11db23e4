// Synthetic dispersive-readout signals: per-state Gaussian clusters in the
// IQ plane, optional raw time traces, boxcar integration, and cluster
// separation metrics.
#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "qsd/common.hpp"

namespace qsd {

// Identity of a prepared/assigned state of a d-level system (qubit d=2,
// qutrit d=3, qudit d>3).
struct StateLabel {
    int index = 0;
    friend constexpr auto operator<=>(StateLabel, StateLabel) = default;
};

// One demodulated readout point: in-phase and quadrature voltage components
// in arbitrary units.
struct IQPoint {
    double i = 0.0;
    double q = 0.0;

    bool finite() const { return std::isfinite(i) && std::isfinite(q); }

    friend constexpr IQPoint operator+(IQPoint a, IQPoint b) { return {a.i + b.i, a.q + b.q}; }
    friend constexpr IQPoint operator-(IQPoint a, IQPoint b) { return {a.i - b.i, a.q - b.q}; }
    friend constexpr IQPoint operator*(double s, IQPoint p) { return {s * p.i, s * p.q}; }
    friend constexpr bool operator==(IQPoint, IQPoint) = default;
};

inline constexpr double dot(IQPoint a, IQPoint b) { return a.i * b.i + a.q * b.q; }

// Symmetric 2x2 matrix [[ii, iq], [iq, qq]] over the IQ plane.
struct Cov2 {
    double ii = 1.0;
    double iq = 0.0;
    double qq = 1.0;

    double det() const { return ii * qq - iq * iq; }
    double trace() const { return ii + qq; }
    bool finite() const {
        return std::isfinite(ii) && std::isfinite(iq) && std::isfinite(qq);
    }
    double min_eigenvalue() const;

    // Throws NumericalError when singular.
    Cov2 inverse() const;
    // log(det); throws NumericalError when det <= 0.
    double log_det() const;

    friend constexpr Cov2 operator+(Cov2 a, Cov2 b) {
        return {a.ii + b.ii, a.iq + b.iq, a.qq + b.qq};
    }
    friend constexpr Cov2 operator*(double s, Cov2 c) {
        return {s * c.ii, s * c.iq, s * c.qq};
    }
    friend constexpr bool operator==(Cov2, Cov2) = default;
};

// Lower-triangular Cholesky factor of a Cov2.
struct Chol2 {
    double l11 = 1.0;
    double l21 = 0.0;
    double l22 = 1.0;

    IQPoint apply(double z1, double z2) const {
        return {l11 * z1, l21 * z1 + l22 * z2};
    }
};

// Throws NumericalError when the matrix is not positive definite.
Chol2 cholesky(const Cov2& c);

// Mahalanobis distance squared (x - mu)^T inv(Sigma) (x - mu), with the
// inverse precomputed.
inline double mahalanobis_sq(IQPoint x, IQPoint mean, const Cov2& inv_cov) {
    const IQPoint d = x - mean;
    return d.i * (inv_cov.ii * d.i + inv_cov.iq * d.q) +
           d.q * (inv_cov.iq * d.i + inv_cov.qq * d.q);
}

struct StateComponent {
    IQPoint mean;
    Cov2 covariance;
    double prior = 0.0;
};

// Per-state cluster means, spreads and priors of a d-level readout model.
struct GaussianStateModel {
    std::vector<StateComponent> states;

    int dimension() const { return static_cast<int>(states.size()); }

    // Throws ModelError when d < 2, priors do not sum to 1, a covariance has
    // a negative eigenvalue, or any entry is non-finite. Positive
    // semi-definite covariances are accepted; generation regularizes them
    // with +1e-12*I before factorization (zero-covariance test fixtures).
    void validate() const;

    bool equal_covariances(double tol = 1e-12) const;
    bool equal_priors(double tol = 1e-12) const;
};

// A raw readout trace: per-sample IQ points at a fixed sample period.
struct ReadoutTrace {
    std::vector<IQPoint> samples;
    double sample_period_ns = 1.0;
};

enum class ShotMode { integrated, trace };

// Labeled collection of readout shots. Shots are stored state-major: all
// shots of state 0 first, then state 1, and so on, each state drawn from its
// own derived RNG stream, so regeneration from (model, seed, count) is
// bit-identical.
struct Dataset {
    ShotMode mode = ShotMode::integrated;
    int dimension = 0;
    std::vector<IQPoint> points;        // integrated mode
    std::vector<ReadoutTrace> traces;   // trace mode
    std::vector<StateLabel> labels;
    std::uint64_t seed = 0;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    // Integrated view of shot k: the stored point, or the boxcar mean of the
    // stored trace.
    IQPoint feature(std::size_t k) const;
};

struct GenerateOptions {
    ShotMode mode = ShotMode::integrated;
    int trace_length = 16;          // samples per trace (trace mode)
    double sample_period_ns = 1.0;  // trace mode
};

// Draws shots_per_state shots from each state's cluster. Integrated mode
// draws one point per shot from N(mean, cov). Trace mode draws trace_length
// samples per shot from N(mean, N*cov) so the boxcar mean of a trace is
// distributed like an integrated shot.
Dataset generate_shots(const GaussianStateModel& model,
                       std::size_t shots_per_state, std::uint64_t seed,
                       const GenerateOptions& options = {});

// Boxcar filter: component-wise arithmetic mean of the samples.
IQPoint integrate_trace(const ReadoutTrace& trace);

// sqrt((mu_a - mu_b)^T inv(Sigma_pooled) (mu_a - mu_b)) with Sigma_pooled the
// prior-weighted average of the two state covariances (equals the common
// covariance when they are equal). Symmetric in (a, b).
double mahalanobis_separation(const GaussianStateModel& model, StateLabel a,
                              StateLabel b);

// FNV-1a hash over mode, dimension, labels and raw feature bytes; used to
// record which dataset a discriminator was fitted on.
std::string dataset_fingerprint(const Dataset& data);

}  // namespace qsd
