#include "qsd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qsd/rng.hpp"

namespace qsd {

namespace {

void check_dims(const std::array<int, 4>& dims) {
    for (int v : dims) {
        if (v < 1) {
            throw ConfigError("mlp dims must be positive, got [" +
                              std::to_string(dims[0]) + ", " + std::to_string(dims[1]) +
                              ", " + std::to_string(dims[2]) + ", " +
                              std::to_string(dims[3]) + "]");
        }
    }
}

// Activations of every layer for one input; kept for backprop.
struct ForwardPass {
    std::array<std::vector<double>, 4> acts;  // acts[0] = input, acts[3] = logits
};

ForwardPass run_forward(const MlpModel& model, std::span<const double> x) {
    ForwardPass fp;
    fp.acts[0].assign(x.begin(), x.end());
    for (int l = 0; l < 3; ++l) {
        const MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
        const int h_in = model.dims[static_cast<std::size_t>(l)];
        const int h_out = model.dims[static_cast<std::size_t>(l + 1)];
        std::vector<double>& out = fp.acts[static_cast<std::size_t>(l + 1)];
        out.resize(static_cast<std::size_t>(h_out));
        const std::vector<double>& in = fp.acts[static_cast<std::size_t>(l)];
        for (int r = 0; r < h_out; ++r) {
            double acc = layer.biases[static_cast<std::size_t>(r)];
            const double* w = &layer.weights[static_cast<std::size_t>(r) *
                                             static_cast<std::size_t>(h_in)];
            for (int c = 0; c < h_in; ++c) acc += w[c] * in[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] = (l < 2) ? std::max(0.0, acc) : acc;
        }
    }
    return fp;
}

// Numerically stable softmax in place.
void softmax(std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

void check_batch(const MlpModel& model, const TrainingBatch& batch) {
    if (batch.features.empty()) throw InputError("empty training batch");
    if (batch.features.size() != batch.labels.size()) {
        throw InputError("batch features/labels size mismatch");
    }
    for (const std::vector<double>& f : batch.features) {
        if (static_cast<int>(f.size()) != model.input_dim()) {
            throw InputError("batch feature width " + std::to_string(f.size()) +
                             " != n_in " + std::to_string(model.input_dim()));
        }
    }
    for (int y : batch.labels) {
        if (y < 0 || y >= model.output_dim()) {
            throw InputError("batch label " + std::to_string(y) + " outside [0, " +
                             std::to_string(model.output_dim()) + ")");
        }
    }
}

}  // namespace

void MlpModel::validate() const {
    check_dims(dims);
    for (int l = 0; l < 3; ++l) {
        const MlpLayer& layer = layers[static_cast<std::size_t>(l)];
        const std::size_t h_in = static_cast<std::size_t>(dims[static_cast<std::size_t>(l)]);
        const std::size_t h_out =
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l + 1)]);
        if (layer.weights.size() != h_in * h_out || layer.biases.size() != h_out) {
            throw InputError("layer " + std::to_string(l + 1) + " parameter shape mismatch");
        }
        for (double w : layer.weights) {
            if (!std::isfinite(w)) throw InputError("non-finite weight in layer " +
                                                    std::to_string(l + 1));
        }
        for (double b : layer.biases) {
            if (!std::isfinite(b)) throw InputError("non-finite bias in layer " +
                                                    std::to_string(l + 1));
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(weight_init_scale >= 0.0)) throw ConfigError("weight_init_scale must be >= 0");
}

MlpModel init_mlp(const std::array<int, 4>& dims, std::uint64_t seed,
                  double weight_init_scale) {
    check_dims(dims);
    MlpModel model;
    model.dims = dims;
    PortableRng rng(derive_seed(seed, StreamTag::train_init, 0));
    for (int l = 0; l < 3; ++l) {
        const int h_in = dims[static_cast<std::size_t>(l)];
        const int h_out = dims[static_cast<std::size_t>(l + 1)];
        const double s = weight_init_scale / std::sqrt(static_cast<double>(h_in));
        MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
        layer.weights.resize(static_cast<std::size_t>(h_in) * static_cast<std::size_t>(h_out));
        for (double& w : layer.weights) w = rng.uniform(-s, s);
        layer.biases.assign(static_cast<std::size_t>(h_out), 0.0);
    }
    return model;
}

std::vector<double> forward_float(const MlpModel& model, std::span<const double> x) {
    if (static_cast<int>(x.size()) != model.input_dim()) {
        throw InputError("forward_float: input width " + std::to_string(x.size()) +
                         " != n_in " + std::to_string(model.input_dim()));
    }
    return run_forward(model, x).acts[3];
}

double mean_cross_entropy(const MlpModel& model, const TrainingBatch& batch) {
    check_batch(model, batch);
    double loss = 0.0;
    for (std::size_t k = 0; k < batch.features.size(); ++k) {
        std::vector<double> logits = forward_float(model, batch.features[k]);
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double v : logits) sum += std::exp(v - m);
        loss += std::log(sum) + m - logits[static_cast<std::size_t>(batch.labels[k])];
    }
    return loss / static_cast<double>(batch.features.size());
}

MlpGradients backprop_gradients(const MlpModel& model, const TrainingBatch& batch) {
    check_batch(model, batch);

    MlpGradients grads;
    for (int l = 0; l < 3; ++l) {
        const std::size_t h_in = static_cast<std::size_t>(model.dims[static_cast<std::size_t>(l)]);
        const std::size_t h_out =
            static_cast<std::size_t>(model.dims[static_cast<std::size_t>(l + 1)]);
        grads.layers[static_cast<std::size_t>(l)].d_weights.assign(h_in * h_out, 0.0);
        grads.layers[static_cast<std::size_t>(l)].d_biases.assign(h_out, 0.0);
    }

    const double inv_n = 1.0 / static_cast<double>(batch.features.size());
    for (std::size_t k = 0; k < batch.features.size(); ++k) {
        const ForwardPass fp = run_forward(model, batch.features[k]);

        // dL/dlogits = softmax(logits) - onehot(label)
        std::vector<double> delta = fp.acts[3];
        softmax(delta);
        delta[static_cast<std::size_t>(batch.labels[k])] -= 1.0;

        for (int l = 2; l >= 0; --l) {
            const MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
            LayerGradients& g = grads.layers[static_cast<std::size_t>(l)];
            const int h_in = model.dims[static_cast<std::size_t>(l)];
            const int h_out = model.dims[static_cast<std::size_t>(l + 1)];
            const std::vector<double>& in = fp.acts[static_cast<std::size_t>(l)];

            for (int r = 0; r < h_out; ++r) {
                const double dr = delta[static_cast<std::size_t>(r)] * inv_n;
                g.d_biases[static_cast<std::size_t>(r)] += dr;
                double* gw = &g.d_weights[static_cast<std::size_t>(r) *
                                          static_cast<std::size_t>(h_in)];
                for (int c = 0; c < h_in; ++c) gw[c] += dr * in[static_cast<std::size_t>(c)];
            }
            if (l == 0) break;

            // Propagate through W_l, then through the ReLU of layer l-1.
            // ReLU'(z) taken as 1 exactly when the stored activation is > 0.
            std::vector<double> prev(static_cast<std::size_t>(h_in), 0.0);
            for (int r = 0; r < h_out; ++r) {
                const double dr = delta[static_cast<std::size_t>(r)];
                const double* w = &layer.weights[static_cast<std::size_t>(r) *
                                                 static_cast<std::size_t>(h_in)];
                for (int c = 0; c < h_in; ++c) prev[static_cast<std::size_t>(c)] += dr * w[c];
            }
            for (int c = 0; c < h_in; ++c) {
                if (!(in[static_cast<std::size_t>(c)] > 0.0)) {
                    prev[static_cast<std::size_t>(c)] = 0.0;
                }
            }
            delta = std::move(prev);
        }
    }
    return grads;
}

std::vector<double> shot_features(const Dataset& data, std::size_t k, int n_in) {
    if (n_in == 2) {
        const IQPoint p = data.feature(k);
        return {p.i, p.q};
    }
    if (data.mode == ShotMode::trace) {
        const ReadoutTrace& t = data.traces[k];
        if (static_cast<int>(2 * t.samples.size()) == n_in) {
            std::vector<double> f;
            f.reserve(t.samples.size() * 2);
            for (const IQPoint& p : t.samples) {
                f.push_back(p.i);
                f.push_back(p.q);
            }
            return f;
        }
    }
    throw InputError("dataset shots do not match network input width " +
                     std::to_string(n_in));
}

TrainResult train_sgd(MlpModel model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (data.empty()) throw InputError("train_sgd: empty dataset");

    TrainingBatch all;
    all.features.reserve(data.size());
    all.labels.reserve(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        all.features.push_back(shot_features(data, k, model.input_dim()));
        all.labels.push_back(data.labels[k].index);
        if (data.labels[k].index < 0 || data.labels[k].index >= model.output_dim()) {
            throw InputError("train_sgd: label outside network output range");
        }
    }

    TrainResult result;
    result.epoch_loss.push_back(mean_cross_entropy(model, all));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        PortableRng shuffle_rng(derive_seed(cfg.seed, StreamTag::train_shuffle,
                                            static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.bounded(i + 1);
            std::swap(order[i], order[j]);
        }

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            TrainingBatch batch;
            batch.features.reserve(end - start);
            batch.labels.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                batch.features.push_back(all.features[order[k]]);
                batch.labels.push_back(all.labels[order[k]]);
            }
            const MlpGradients grads = backprop_gradients(model, batch);
            for (int l = 0; l < 3; ++l) {
                MlpLayer& layer = model.layers[static_cast<std::size_t>(l)];
                const LayerGradients& g = grads.layers[static_cast<std::size_t>(l)];
                for (std::size_t w = 0; w < layer.weights.size(); ++w) {
                    layer.weights[w] -= cfg.learning_rate * g.d_weights[w];
                }
                for (std::size_t b = 0; b < layer.biases.size(); ++b) {
                    layer.biases[b] -= cfg.learning_rate * g.d_biases[b];
                }
            }
        }

        const double loss = mean_cross_entropy(model, all);
        if (!std::isfinite(loss)) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) +
                                " (learning_rate = " + std::to_string(cfg.learning_rate) +
                                ", loss not finite)");
        }
        result.epoch_loss.push_back(loss);
    }

    result.model = std::move(model);
    return result;
}

StateLabel predict(const MlpModel& model, IQPoint x) {
    if (!x.finite()) throw InputError("predict: non-finite input point");
    if (model.input_dim() != 2) {
        throw InputError("predict(MlpModel, IQPoint) requires n_in == 2");
    }
    const std::array<double, 2> f{x.i, x.q};
    const std::vector<double> logits = forward_float(model, f);
    int best = 0;
    for (int s = 1; s < static_cast<int>(logits.size()); ++s) {
        if (logits[static_cast<std::size_t>(s)] > logits[static_cast<std::size_t>(best)]) {
            best = s;
        }
    }
    return StateLabel{best};
}

StateLabel classify_shot(const MlpModel& m, const Dataset& d, std::size_t k) {
    const std::vector<double> f = shot_features(d, k, m.input_dim());
    const std::vector<double> logits = forward_float(m, f);
    int best = 0;
    for (int s = 1; s < static_cast<int>(logits.size()); ++s) {
        if (logits[static_cast<std::size_t>(s)] > logits[static_cast<std::size_t>(best)]) {
            best = s;
        }
    }
    return StateLabel{best};
}

}  // namespace qsd
