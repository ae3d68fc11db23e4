// 16-bit fixed-point parameterization of the MLP and the scalar reference
// inference path.
//
// Pinned arithmetic, identical across platforms:
//   * Parameters and activations are signed 16-bit in Qm.f with
//     f = fractional_bits (default 12, Q3.12).
//   * Encoding uses round-half-to-even.
//   * MACs accumulate exactly in 64-bit (>= 48-bit headroom holds for
//     2N-term dot products at N <= 1024).
//   * Layer boundaries apply an arithmetic right shift by the layer's
//     output shift with round-half-up (add 2^(shift-1) before shifting),
//     then saturate to int16. ReLU is max(0, .) after saturation.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qsd/mlp.hpp"

namespace qsd {

struct QuantizedLayer {
    std::vector<std::int16_t> weights;  // row-major, h_out x h_in
    std::vector<std::int16_t> biases;   // h_out
    // Right shift applied to the accumulator at the layer output; equals
    // fractional_bits when inputs and weights share the Q-format.
    int output_shift = 12;
};

struct QuantizedMlp {
    std::array<int, 4> dims{2, 8, 8, 2};
    int fractional_bits = 12;
    std::array<QuantizedLayer, 3> layers;

    int input_dim() const { return dims[0]; }
    int output_dim() const { return dims[3]; }
    void validate() const;
};

// Round-half-even encoding of every parameter; requires
// |param| < 2^(15 - fractional_bits), otherwise throws QuantizationError
// naming the layer and value.
QuantizedMlp quantize_model(const MlpModel& model, int fractional_bits = 12);

// Float model with parameters value / 2^fractional_bits.
MlpModel dequantize_model(const QuantizedMlp& model);

// Feature encoding into the same Q-format; values outside the representable
// range saturate.
std::vector<std::int16_t> quantize_features(std::span<const double> x,
                                            int fractional_bits);

inline double dequantize_value(std::int16_t v, int fractional_bits) {
    return static_cast<double>(v) / static_cast<double>(std::int64_t{1} << fractional_bits);
}

struct FixedForward {
    std::vector<std::int16_t> logits;
    std::uint64_t saturation_count = 0;  // values clamped at layer boundaries
};

// Scalar fixed-point inference, bit-exact deterministic. Saturates, never
// overflows.
FixedForward forward_fixed_scalar(const QuantizedMlp& model,
                                  std::span<const std::int16_t> x);

// Quantizes [x.i, x.q] and returns the argmax of the fixed logits (lowest
// index on ties); requires n_in == 2.
StateLabel predict(const QuantizedMlp& model, IQPoint x);

StateLabel classify_shot(const QuantizedMlp& m, const Dataset& d, std::size_t k);

// Fixed-point feature vectors for every shot of a dataset.
std::vector<std::vector<std::int16_t>> quantize_dataset_features(const Dataset& data,
                                                                 const QuantizedMlp& model);

namespace fixed_detail {

inline std::int16_t saturate16(std::int64_t v, std::uint64_t* saturations) {
    if (v > 32767) {
        if (saturations != nullptr) ++*saturations;
        return 32767;
    }
    if (v < -32768) {
        if (saturations != nullptr) ++*saturations;
        return -32768;
    }
    return static_cast<std::int16_t>(v);
}

// floor(v / 2^shift + 1/2): arithmetic right shift after adding half an LSB.
inline std::int64_t shift_round_half_up(std::int64_t v, int shift) {
    if (shift == 0) return v;
    return (v + (std::int64_t{1} << (shift - 1))) >> shift;
}

}  // namespace fixed_detail

}  // namespace qsd
