// Experiment configuration: one JSON document drives generation, fitting,
// training, quantization and the accelerator simulation.
//
// Parsing is strict: unknown keys raise ConfigError naming the offending
// key, so typos fail loudly instead of silently falling back to defaults.
// Every field has a default; config_to_json materializes all of them, and
// parse(config_to_json(c)) round-trips identically.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsd/aie_model.hpp"
#include "qsd/mlp.hpp"
#include "qsd/pipeline.hpp"
#include "qsd/signal_model.hpp"

namespace qsd {

struct DatasetConfig {
    std::size_t train_shots_per_state = 20000;
    std::size_t test_shots_per_state = 10000;
    ShotMode mode = ShotMode::integrated;
    int trace_length = 16;
    double sample_period_ns = 1.0;
};

struct NnConfig {
    std::array<int, 4> dims{2, 8, 8, 2};
    double learning_rate = 0.05;
    int epochs = 40;
    int batch_size = 32;
    double weight_init_scale = 1.0;
};

struct BayesConfig {
    std::string method = "auto";  // auto | analytic | mc
    std::size_t mc_shots = 200000;
};

struct ExperimentConfig {
    int dimension = 2;
    std::uint64_t seed = 42;
    // Explicit per-state clusters; when absent the ring preset applies:
    // state s at angle 2*pi*s/d on a circle of ring_radius, isotropic
    // cluster_sigma, equal priors.
    std::optional<std::vector<StateComponent>> states;
    double ring_radius = 2.17;
    double cluster_sigma = 1.0;
    DatasetConfig dataset;
    std::vector<std::string> discriminators{"lda", "qda", "nn"};
    NnConfig nn;
    int fractional_bits = 12;
    aie::TileArrayConfig array;
    std::string profile = "vck190-ref";
    aie::StreamPipelineConfig pipeline;
    BayesConfig bayes;
    std::string out_dir = "out";

    // Throws ConfigError on out-of-range values or inconsistent shapes
    // (nn dims must be [2, h1, h2, dimension]).
    void validate() const;

    // Builds the Gaussian state model (explicit states or ring preset) and
    // validates it.
    GaussianStateModel state_model() const;

    TrainConfig train_config() const;
    GenerateOptions generate_options() const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical (all-defaults-materialized, sorted-key) JSON
// text; recorded in reports to tie artifacts to their configuration.
std::string config_hash(const ExperimentConfig& config);

const char* to_string(ShotMode mode);
ShotMode shot_mode_from_string(const std::string& text);

}  // namespace qsd
