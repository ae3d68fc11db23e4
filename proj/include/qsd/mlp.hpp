// 3-layer feed-forward network: float training path and the scalar reference
// used as the oracle for the fixed-point and vectorized kernels.
//
// Architecture is fixed at three weighted layers with ReLU after layers 1
// and 2 and identity at layer 3. Inference uses raw-logit argmax; softmax
// appears only inside the training loss.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qsd/signal_model.hpp"

namespace qsd {

struct MlpLayer {
    std::vector<double> weights;  // row-major, h_out x h_in
    std::vector<double> biases;   // h_out
};

struct MlpModel {
    std::array<int, 4> dims{2, 8, 8, 2};  // [n_in, h1, h2, n_out]
    std::array<MlpLayer, 3> layers;

    int input_dim() const { return dims[0]; }
    int output_dim() const { return dims[3]; }
    // Throws ConfigError on bad dims, InputError on shape/finiteness issues.
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 40;
    int batch_size = 32;
    std::uint64_t seed = 1;
    double weight_init_scale = 1.0;

    void validate() const;
};

// Weights drawn from uniform(-s, s) with s = weight_init_scale / sqrt(h_in),
// biases zero. Bit-identical under a fixed seed.
MlpModel init_mlp(const std::array<int, 4>& dims, std::uint64_t seed,
                  double weight_init_scale = 1.0);

// L1 = ReLU(W1 x + B1); L2 = ReLU(W2 L1 + B2); returns L3 = W3 L2 + B3.
std::vector<double> forward_float(const MlpModel& model, std::span<const double> x);

struct LayerGradients {
    std::vector<double> d_weights;
    std::vector<double> d_biases;
};

struct MlpGradients {
    std::array<LayerGradients, 3> layers;
};

struct TrainingBatch {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
};

// Exact analytic gradients of the mean softmax cross-entropy over the batch.
MlpGradients backprop_gradients(const MlpModel& model, const TrainingBatch& batch);

// Mean softmax cross-entropy of the batch.
double mean_cross_entropy(const MlpModel& model, const TrainingBatch& batch);

struct TrainResult {
    MlpModel model;
    // epoch_loss[0] is the loss of the initial model, epoch_loss[e] the loss
    // after epoch e; on the shipped fixtures the sequence is non-increasing.
    std::vector<double> epoch_loss;
};

// Plain mini-batch SGD, fixed learning rate, per-epoch Fisher-Yates shuffle
// from a derived stream. Throws TrainingError naming the epoch and learning
// rate when the loss becomes non-finite.
TrainResult train_sgd(MlpModel model, const Dataset& data, const TrainConfig& cfg);

// Feature vector of shot k matching n_in: [i, q] for integrated shots (or
// boxcar-integrated traces when n_in == 2), flattened [i0, q0, i1, q1, ...]
// for trace shots when n_in == 2N.
std::vector<double> shot_features(const Dataset& data, std::size_t k, int n_in);

// Argmax of forward_float([x.i, x.q]); requires n_in == 2.
StateLabel predict(const MlpModel& model, IQPoint x);

StateLabel classify_shot(const MlpModel& m, const Dataset& d, std::size_t k);

}  // namespace qsd
