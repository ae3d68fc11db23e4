#include "qsd/fixed_point.hpp"

#include <algorithm>
#include <cmath>

namespace qsd {

namespace {

// Round-half-to-even to the nearest integer. Implemented by hand so the
// result does not depend on the floating-point environment.
std::int64_t round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    const std::int64_t fi = static_cast<std::int64_t>(f);
    if (frac > 0.5) return fi + 1;
    if (frac < 0.5) return fi;
    return (fi % 2 == 0) ? fi : fi + 1;
}

void check_fractional_bits(int fractional_bits) {
    if (fractional_bits < 1 || fractional_bits > 14) {
        throw ConfigError("fractional_bits must be in [1, 14], got " +
                          std::to_string(fractional_bits));
    }
}

}  // namespace

void QuantizedMlp::validate() const {
    check_fractional_bits(fractional_bits);
    for (int l = 0; l < 3; ++l) {
        const QuantizedLayer& layer = layers[static_cast<std::size_t>(l)];
        const std::size_t h_in = static_cast<std::size_t>(dims[static_cast<std::size_t>(l)]);
        const std::size_t h_out =
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l + 1)]);
        if (layer.weights.size() != h_in * h_out || layer.biases.size() != h_out) {
            throw InputError("quantized layer " + std::to_string(l + 1) +
                             " parameter shape mismatch");
        }
        if (layer.output_shift < 0 || layer.output_shift > 30) {
            throw InputError("quantized layer " + std::to_string(l + 1) +
                             " output_shift out of range");
        }
    }
}

QuantizedMlp quantize_model(const MlpModel& model, int fractional_bits) {
    model.validate();
    check_fractional_bits(fractional_bits);

    const double scale = static_cast<double>(std::int64_t{1} << fractional_bits);
    const double limit = 32768.0;  // |value * scale| must round inside int16

    QuantizedMlp out;
    out.dims = model.dims;
    out.fractional_bits = fractional_bits;
    for (int l = 0; l < 3; ++l) {
        const MlpLayer& src = model.layers[static_cast<std::size_t>(l)];
        QuantizedLayer& dst = out.layers[static_cast<std::size_t>(l)];
        dst.output_shift = fractional_bits;
        auto encode = [&](double v, const char* kind, std::size_t idx) {
            const std::int64_t q = round_half_even(v * scale);
            if (q > 32767 || q < -32768) {
                throw QuantizationError(
                    "layer " + std::to_string(l + 1) + " " + kind + "[" +
                    std::to_string(idx) + "] = " + std::to_string(v) +
                    " exceeds Q" + std::to_string(15 - fractional_bits) + "." +
                    std::to_string(fractional_bits) + " range (|v| < " +
                    std::to_string(limit / scale) + ")");
            }
            return static_cast<std::int16_t>(q);
        };
        dst.weights.resize(src.weights.size());
        for (std::size_t k = 0; k < src.weights.size(); ++k) {
            dst.weights[k] = encode(src.weights[k], "weight", k);
        }
        dst.biases.resize(src.biases.size());
        for (std::size_t k = 0; k < src.biases.size(); ++k) {
            dst.biases[k] = encode(src.biases[k], "bias", k);
        }
    }
    return out;
}

MlpModel dequantize_model(const QuantizedMlp& model) {
    model.validate();
    MlpModel out;
    out.dims = model.dims;
    for (int l = 0; l < 3; ++l) {
        const QuantizedLayer& src = model.layers[static_cast<std::size_t>(l)];
        MlpLayer& dst = out.layers[static_cast<std::size_t>(l)];
        dst.weights.resize(src.weights.size());
        for (std::size_t k = 0; k < src.weights.size(); ++k) {
            dst.weights[k] = dequantize_value(src.weights[k], model.fractional_bits);
        }
        dst.biases.resize(src.biases.size());
        for (std::size_t k = 0; k < src.biases.size(); ++k) {
            dst.biases[k] = dequantize_value(src.biases[k], model.fractional_bits);
        }
    }
    return out;
}

std::vector<std::int16_t> quantize_features(std::span<const double> x,
                                            int fractional_bits) {
    check_fractional_bits(fractional_bits);
    const double scale = static_cast<double>(std::int64_t{1} << fractional_bits);
    std::vector<std::int16_t> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k])) throw InputError("non-finite feature value");
        const std::int64_t q = round_half_even(x[k] * scale);
        out[k] = fixed_detail::saturate16(q, nullptr);
    }
    return out;
}

FixedForward forward_fixed_scalar(const QuantizedMlp& model,
                                  std::span<const std::int16_t> x) {
    model.validate();
    if (static_cast<int>(x.size()) != model.input_dim()) {
        throw InputError("forward_fixed_scalar: input width " + std::to_string(x.size()) +
                         " != n_in " + std::to_string(model.input_dim()));
    }

    FixedForward result;
    std::vector<std::int16_t> act(x.begin(), x.end());
    for (int l = 0; l < 3; ++l) {
        const QuantizedLayer& layer = model.layers[static_cast<std::size_t>(l)];
        const int h_in = model.dims[static_cast<std::size_t>(l)];
        const int h_out = model.dims[static_cast<std::size_t>(l + 1)];
        std::vector<std::int16_t> next(static_cast<std::size_t>(h_out));
        for (int r = 0; r < h_out; ++r) {
            std::int64_t acc = 0;
            const std::int16_t* w = &layer.weights[static_cast<std::size_t>(r) *
                                                   static_cast<std::size_t>(h_in)];
            for (int c = 0; c < h_in; ++c) {
                acc += static_cast<std::int64_t>(w[c]) *
                       static_cast<std::int64_t>(act[static_cast<std::size_t>(c)]);
            }
            // Bias is Qf; products are Q2f. Align before the shift back.
            acc += static_cast<std::int64_t>(layer.biases[static_cast<std::size_t>(r)])
                   << layer.output_shift;
            std::int64_t v = fixed_detail::shift_round_half_up(acc, layer.output_shift);
            std::int16_t y = fixed_detail::saturate16(v, &result.saturation_count);
            if (l < 2 && y < 0) y = 0;
            next[static_cast<std::size_t>(r)] = y;
        }
        act = std::move(next);
    }
    result.logits = std::move(act);
    return result;
}

StateLabel predict(const QuantizedMlp& model, IQPoint x) {
    if (!x.finite()) throw InputError("predict: non-finite input point");
    if (model.input_dim() != 2) {
        throw InputError("predict(QuantizedMlp, IQPoint) requires n_in == 2");
    }
    const std::array<double, 2> f{x.i, x.q};
    const std::vector<std::int16_t> xq = quantize_features(f, model.fractional_bits);
    const FixedForward ff = forward_fixed_scalar(model, xq);
    int best = 0;
    for (int s = 1; s < static_cast<int>(ff.logits.size()); ++s) {
        if (ff.logits[static_cast<std::size_t>(s)] >
            ff.logits[static_cast<std::size_t>(best)]) {
            best = s;
        }
    }
    return StateLabel{best};
}

StateLabel classify_shot(const QuantizedMlp& m, const Dataset& d, std::size_t k) {
    const std::vector<double> f = shot_features(d, k, m.input_dim());
    const std::vector<std::int16_t> xq = quantize_features(f, m.fractional_bits);
    const FixedForward ff = forward_fixed_scalar(m, xq);
    int best = 0;
    for (int s = 1; s < static_cast<int>(ff.logits.size()); ++s) {
        if (ff.logits[static_cast<std::size_t>(s)] >
            ff.logits[static_cast<std::size_t>(best)]) {
            best = s;
        }
    }
    return StateLabel{best};
}

std::vector<std::vector<std::int16_t>> quantize_dataset_features(
    const Dataset& data, const QuantizedMlp& model) {
    std::vector<std::vector<std::int16_t>> out;
    out.reserve(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        const std::vector<double> f = shot_features(data, k, model.input_dim());
        out.push_back(quantize_features(f, model.fractional_bits));
    }
    return out;
}

}  // namespace qsd
