// Pinned, portable randomness.
//
// Every random draw in qsdkit flows from one master seed through a documented
// derivation, so results are bit-identical across runs and platforms:
//
//   * Stream seeds are derived with the SplitMix64 finalizer:
//       derive_seed(master, tag, index)
//         = mix(mix(master + GOLDEN * (tag + 1)) + GOLDEN * (index + 1))
//     where GOLDEN = 0x9E3779B97F4A7C15 and mix() is the standard SplitMix64
//     output function. Tags identify a pipeline stage, indexes split the
//     stage into independent substreams (one per prepared state, per epoch).
//
//   * The per-stream generator is std::mt19937_64, whose algorithm and output
//     are fully pinned by the C++ standard.
//
//   * Uniform doubles take the top 53 bits: (u >> 11) * 2^-53, giving [0, 1).
//
//   * Gaussians use the Box-Muller transform, always consuming exactly two
//     uniforms per pair. No caching, so stream position stays explicit.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace qsd {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 output function (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

// Stage tags for derive_seed. Values are part of the on-disk reproducibility
// contract: changing them changes every generated dataset.
enum class StreamTag : std::uint64_t {
    gen_state = 1,      // index = prepared state
    train_init = 2,     // index = 0
    train_shuffle = 3,  // index = epoch
    bayes_mc = 4,       // index = 0
    dataset_train = 5,  // index = 0
    dataset_test = 6,   // index = 0
};

inline constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                           std::uint64_t index) {
    using detail::kGolden;
    using detail::splitmix_mix;
    const std::uint64_t stage = splitmix_mix(
        master + kGolden * (static_cast<std::uint64_t>(tag) + 1));
    return splitmix_mix(stage + kGolden * (index + 1));
}

class PortableRng {
  public:
    explicit PortableRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Modulo draw; the bias is < 2^-53 * n and irrelevant for shuffling.
    std::uint64_t bounded(std::uint64_t n) { return next_u64() % n; }

    // One Box-Muller step: two independent standard normals from two
    // uniforms. u1 is mapped into (0, 1] so the log is always finite.
    std::pair<double, double> gauss_pair() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * kPi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

  private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;
    std::mt19937_64 gen_;
};

}  // namespace qsd
