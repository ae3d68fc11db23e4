#include "qsd/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "qsd/io.hpp"

namespace qsd {

using nlohmann::json;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

[[noreturn]] void bad_key(const std::string& location, const std::string& key) {
    const std::string full = location.empty() ? key : location + "." + key;
    throw ConfigError("unknown config key '" + full + "'");
}

void require_object(const json& value, const std::string& location) {
    if (!value.is_object()) {
        throw ConfigError("config section '" + location +
                          "' must be a JSON object");
    }
}

void check_keys(const json& obj, const std::string& location,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        const bool known =
            std::any_of(allowed.begin(), allowed.end(),
                        [&](const char* k) { return item.key() == k; });
        if (!known) bad_key(location, item.key());
    }
}

template <typename T>
T get_field(const json& obj, const std::string& location, const char* key,
            T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        const std::string full =
            location.empty() ? key : location + "." + key;
        throw ConfigError("config key '" + full + "' has the wrong type");
    }
}

DatasetConfig parse_dataset(const json& obj) {
    require_object(obj, "dataset");
    check_keys(obj, "dataset",
               {"train_shots_per_state", "test_shots_per_state", "mode",
                "trace_length", "sample_period_ns"});
    DatasetConfig out;
    out.train_shots_per_state = get_field<std::size_t>(
        obj, "dataset", "train_shots_per_state", out.train_shots_per_state);
    out.test_shots_per_state = get_field<std::size_t>(
        obj, "dataset", "test_shots_per_state", out.test_shots_per_state);
    out.mode = shot_mode_from_string(
        get_field<std::string>(obj, "dataset", "mode", to_string(out.mode)));
    out.trace_length =
        get_field<int>(obj, "dataset", "trace_length", out.trace_length);
    out.sample_period_ns = get_field<double>(obj, "dataset",
                                             "sample_period_ns",
                                             out.sample_period_ns);
    return out;
}

NnConfig parse_nn(const json& obj) {
    require_object(obj, "nn");
    check_keys(obj, "nn",
               {"dims", "learning_rate", "epochs", "batch_size",
                "weight_init_scale"});
    NnConfig out;
    if (obj.contains("dims")) {
        const auto dims = get_field<std::vector<int>>(obj, "nn", "dims", {});
        if (dims.size() != 4) {
            throw ConfigError("config key 'nn.dims' must have 4 entries");
        }
        std::copy(dims.begin(), dims.end(), out.dims.begin());
    }
    out.learning_rate =
        get_field<double>(obj, "nn", "learning_rate", out.learning_rate);
    out.epochs = get_field<int>(obj, "nn", "epochs", out.epochs);
    out.batch_size = get_field<int>(obj, "nn", "batch_size", out.batch_size);
    out.weight_init_scale = get_field<double>(obj, "nn", "weight_init_scale",
                                              out.weight_init_scale);
    return out;
}

BayesConfig parse_bayes(const json& obj) {
    require_object(obj, "bayes");
    check_keys(obj, "bayes", {"method", "mc_shots"});
    BayesConfig out;
    out.method = get_field<std::string>(obj, "bayes", "method", out.method);
    out.mc_shots =
        get_field<std::size_t>(obj, "bayes", "mc_shots", out.mc_shots);
    return out;
}

aie::TileArrayConfig parse_array(const json& obj) {
    require_object(obj, "array");
    check_keys(obj, "array",
               {"rows", "cols", "local_mem_bytes", "mem_banks",
                "vector_lanes", "gmio_in", "gmio_out", "clock_hz"});
    aie::TileArrayConfig out;
    out.rows = get_field<int>(obj, "array", "rows", out.rows);
    out.cols = get_field<int>(obj, "array", "cols", out.cols);
    out.local_mem_bytes =
        get_field<int>(obj, "array", "local_mem_bytes", out.local_mem_bytes);
    out.mem_banks = get_field<int>(obj, "array", "mem_banks", out.mem_banks);
    out.vector_lanes =
        get_field<int>(obj, "array", "vector_lanes", out.vector_lanes);
    out.gmio_in = get_field<int>(obj, "array", "gmio_in", out.gmio_in);
    out.gmio_out = get_field<int>(obj, "array", "gmio_out", out.gmio_out);
    out.clock_hz = get_field<double>(obj, "array", "clock_hz", out.clock_hz);
    return out;
}

aie::StreamPipelineConfig parse_pipeline(const json& obj) {
    require_object(obj, "pipeline");
    check_keys(obj, "pipeline",
               {"mm2s_cycles", "mm2s_fifo_depth", "kernel_cycles",
                "kernel_fifo_depth", "s2mm_cycles", "s2mm_fifo_depth",
                "main_overhead_cycles", "init_cycles", "overlap"});
    aie::StreamPipelineConfig out;
    out.mm2s.cycles = get_field<std::uint64_t>(obj, "pipeline", "mm2s_cycles",
                                               out.mm2s.cycles);
    out.mm2s.fifo_depth = get_field<int>(obj, "pipeline", "mm2s_fifo_depth",
                                         out.mm2s.fifo_depth);
    out.kernel.cycles = get_field<std::uint64_t>(
        obj, "pipeline", "kernel_cycles", out.kernel.cycles);
    out.kernel.fifo_depth = get_field<int>(
        obj, "pipeline", "kernel_fifo_depth", out.kernel.fifo_depth);
    out.s2mm.cycles = get_field<std::uint64_t>(obj, "pipeline", "s2mm_cycles",
                                               out.s2mm.cycles);
    out.s2mm.fifo_depth = get_field<int>(obj, "pipeline", "s2mm_fifo_depth",
                                         out.s2mm.fifo_depth);
    out.main_overhead_cycles = get_field<std::uint64_t>(
        obj, "pipeline", "main_overhead_cycles", out.main_overhead_cycles);
    out.init_cycles = get_field<std::uint64_t>(obj, "pipeline", "init_cycles",
                                               out.init_cycles);
    out.overlap_enabled =
        get_field<bool>(obj, "pipeline", "overlap", out.overlap_enabled);
    return out;
}

std::vector<StateComponent> parse_states(const json& arr) {
    if (!arr.is_array() || arr.empty()) {
        throw ConfigError("config key 'states' must be a non-empty array");
    }
    std::vector<StateComponent> out;
    int with_prior = 0;
    for (std::size_t s = 0; s < arr.size(); ++s) {
        const json& st = arr[s];
        const std::string loc = "states[" + std::to_string(s) + "]";
        require_object(st, loc);
        check_keys(st, loc, {"mean", "cov", "prior"});
        StateComponent comp;
        const auto mean =
            get_field<std::vector<double>>(st, loc, "mean", {0.0, 0.0});
        if (mean.size() != 2) {
            throw ConfigError("config key '" + loc +
                              ".mean' must have 2 entries");
        }
        comp.mean = {mean[0], mean[1]};
        if (st.contains("cov")) {
            const auto cov = get_field<std::vector<std::vector<double>>>(
                st, loc, "cov", {});
            if (cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2) {
                throw ConfigError("config key '" + loc +
                                  ".cov' must be a 2x2 matrix");
            }
            if (cov[0][1] != cov[1][0]) {
                throw ConfigError("config key '" + loc +
                                  ".cov' must be symmetric");
            }
            comp.covariance = {cov[0][0], cov[0][1], cov[1][1]};
        }
        if (st.contains("prior")) {
            comp.prior = get_field<double>(st, loc, "prior", 0.0);
            ++with_prior;
        } else {
            comp.prior = -1.0;
        }
        out.push_back(comp);
    }
    if (with_prior == 0) {
        for (StateComponent& comp : out) {
            comp.prior = 1.0 / static_cast<double>(out.size());
        }
    } else if (with_prior != static_cast<int>(out.size())) {
        throw ConfigError(
            "either every state or no state may set a prior");
    }
    return out;
}

IQPoint ring_point(double radius, int s, int d) {
    // Quarter-turn angles come out exact so the reference qubit fixture
    // keeps means of exactly (+-radius, 0).
    if ((4 * s) % d == 0) {
        switch ((4 * s / d) % 4) {
            case 0: return {radius, 0.0};
            case 1: return {0.0, radius};
            case 2: return {-radius, 0.0};
            case 3: return {0.0, -radius};
        }
    }
    const double angle = 2.0 * kPi * static_cast<double>(s) / d;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

const char* to_string(ShotMode mode) {
    return mode == ShotMode::trace ? "trace" : "integrated";
}

ShotMode shot_mode_from_string(const std::string& text) {
    if (text == "integrated") return ShotMode::integrated;
    if (text == "trace") return ShotMode::trace;
    throw ConfigError("dataset.mode must be 'integrated' or 'trace', got '" +
                      text + "'");
}

void ExperimentConfig::validate() const {
    if (dimension < 2 || dimension > 256) {
        throw ConfigError("dimension must be in [2, 256]");
    }
    if (!(ring_radius > 0.0)) throw ConfigError("ring_radius must be > 0");
    if (!(cluster_sigma > 0.0)) throw ConfigError("cluster_sigma must be > 0");
    if (dataset.train_shots_per_state < 1 ||
        dataset.test_shots_per_state < 1) {
        throw ConfigError("dataset shot counts must be >= 1");
    }
    if (dataset.trace_length < 1) {
        throw ConfigError("dataset.trace_length must be >= 1");
    }
    if (!(dataset.sample_period_ns > 0.0)) {
        throw ConfigError("dataset.sample_period_ns must be > 0");
    }
    if (discriminators.empty()) {
        throw ConfigError("discriminators must not be empty");
    }
    for (const std::string& d : discriminators) {
        if (d != "lda" && d != "qda" && d != "nn") {
            throw ConfigError("unknown discriminator '" + d +
                              "' (expected lda, qda or nn)");
        }
    }
    if (nn.dims[0] != 2) {
        throw ConfigError("nn.dims[0] must be 2 (IQ features)");
    }
    if (nn.dims[3] != dimension) {
        throw ConfigError("nn.dims[3] must equal dimension");
    }
    if (nn.dims[1] < 1 || nn.dims[2] < 1) {
        throw ConfigError("nn hidden widths must be >= 1");
    }
    train_config().validate();
    if (fractional_bits < 1 || fractional_bits > 14) {
        throw ConfigError("quantization.fractional_bits must be in [1, 14]");
    }
    if (bayes.method != "auto" && bayes.method != "analytic" &&
        bayes.method != "mc") {
        throw ConfigError("bayes.method must be auto, analytic or mc");
    }
    if (bayes.mc_shots < 1000) {
        throw ConfigError("bayes.mc_shots must be >= 1000");
    }
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    array.validate();
    pipeline.validate();
    aie::find_profile(profile);
    if (states.has_value()) {
        if (static_cast<int>(states->size()) != dimension) {
            throw ConfigError("states array must have 'dimension' entries");
        }
    }
}

GaussianStateModel ExperimentConfig::state_model() const {
    GaussianStateModel model;
    if (states.has_value()) {
        model.states = *states;
    } else {
        const double variance = cluster_sigma * cluster_sigma;
        for (int s = 0; s < dimension; ++s) {
            StateComponent comp;
            comp.mean = ring_point(ring_radius, s, dimension);
            comp.covariance = {variance, 0.0, variance};
            comp.prior = 1.0 / static_cast<double>(dimension);
            model.states.push_back(comp);
        }
    }
    model.validate();
    return model;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig cfg;
    cfg.learning_rate = nn.learning_rate;
    cfg.epochs = nn.epochs;
    cfg.batch_size = nn.batch_size;
    cfg.seed = seed;
    cfg.weight_init_scale = nn.weight_init_scale;
    return cfg;
}

GenerateOptions ExperimentConfig::generate_options() const {
    GenerateOptions opt;
    opt.mode = dataset.mode;
    opt.trace_length = dataset.trace_length;
    opt.sample_period_ns = dataset.sample_period_ns;
    return opt;
}

ExperimentConfig parse_config(const json& doc) {
    require_object(doc, "(top level)");
    check_keys(doc, "",
               {"dimension", "seed", "states", "ring_radius", "cluster_sigma",
                "dataset", "discriminators", "nn", "quantization", "array",
                "profile", "pipeline", "bayes", "out_dir"});
    ExperimentConfig cfg;
    cfg.dimension = get_field<int>(doc, "", "dimension", cfg.dimension);
    cfg.seed = get_field<std::uint64_t>(doc, "", "seed", cfg.seed);
    if (doc.contains("states") && !doc.at("states").is_null()) {
        cfg.states = parse_states(doc.at("states"));
    }
    cfg.ring_radius =
        get_field<double>(doc, "", "ring_radius", cfg.ring_radius);
    cfg.cluster_sigma =
        get_field<double>(doc, "", "cluster_sigma", cfg.cluster_sigma);
    if (doc.contains("dataset")) cfg.dataset = parse_dataset(doc.at("dataset"));
    cfg.discriminators = get_field<std::vector<std::string>>(
        doc, "", "discriminators", cfg.discriminators);
    if (doc.contains("nn")) cfg.nn = parse_nn(doc.at("nn"));
    if (doc.contains("quantization")) {
        const json& q = doc.at("quantization");
        require_object(q, "quantization");
        check_keys(q, "quantization", {"fractional_bits"});
        cfg.fractional_bits = get_field<int>(q, "quantization",
                                             "fractional_bits",
                                             cfg.fractional_bits);
    }
    if (doc.contains("array")) cfg.array = parse_array(doc.at("array"));
    cfg.profile = get_field<std::string>(doc, "", "profile", cfg.profile);
    if (doc.contains("pipeline")) {
        cfg.pipeline = parse_pipeline(doc.at("pipeline"));
    }
    if (doc.contains("bayes")) cfg.bayes = parse_bayes(doc.at("bayes"));
    cfg.out_dir = get_field<std::string>(doc, "", "out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    return parse_config(io::read_json_file(path));
}

json config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["dimension"] = cfg.dimension;
    doc["seed"] = cfg.seed;
    if (cfg.states.has_value()) {
        json arr = json::array();
        for (const StateComponent& comp : *cfg.states) {
            arr.push_back(
                {{"mean", {comp.mean.i, comp.mean.q}},
                 {"cov",
                  {{comp.covariance.ii, comp.covariance.iq},
                   {comp.covariance.iq, comp.covariance.qq}}},
                 {"prior", comp.prior}});
        }
        doc["states"] = arr;
    }
    doc["ring_radius"] = cfg.ring_radius;
    doc["cluster_sigma"] = cfg.cluster_sigma;
    doc["dataset"] = {
        {"train_shots_per_state", cfg.dataset.train_shots_per_state},
        {"test_shots_per_state", cfg.dataset.test_shots_per_state},
        {"mode", to_string(cfg.dataset.mode)},
        {"trace_length", cfg.dataset.trace_length},
        {"sample_period_ns", cfg.dataset.sample_period_ns}};
    doc["discriminators"] = cfg.discriminators;
    doc["nn"] = {{"dims", cfg.nn.dims},
                 {"learning_rate", cfg.nn.learning_rate},
                 {"epochs", cfg.nn.epochs},
                 {"batch_size", cfg.nn.batch_size},
                 {"weight_init_scale", cfg.nn.weight_init_scale}};
    doc["quantization"] = {{"fractional_bits", cfg.fractional_bits}};
    doc["array"] = {{"rows", cfg.array.rows},
                    {"cols", cfg.array.cols},
                    {"local_mem_bytes", cfg.array.local_mem_bytes},
                    {"mem_banks", cfg.array.mem_banks},
                    {"vector_lanes", cfg.array.vector_lanes},
                    {"gmio_in", cfg.array.gmio_in},
                    {"gmio_out", cfg.array.gmio_out},
                    {"clock_hz", cfg.array.clock_hz}};
    doc["profile"] = cfg.profile;
    doc["pipeline"] = {{"mm2s_cycles", cfg.pipeline.mm2s.cycles},
                       {"mm2s_fifo_depth", cfg.pipeline.mm2s.fifo_depth},
                       {"kernel_cycles", cfg.pipeline.kernel.cycles},
                       {"kernel_fifo_depth", cfg.pipeline.kernel.fifo_depth},
                       {"s2mm_cycles", cfg.pipeline.s2mm.cycles},
                       {"s2mm_fifo_depth", cfg.pipeline.s2mm.fifo_depth},
                       {"main_overhead_cycles",
                        cfg.pipeline.main_overhead_cycles},
                       {"init_cycles", cfg.pipeline.init_cycles},
                       {"overlap", cfg.pipeline.overlap_enabled}};
    doc["bayes"] = {{"method", cfg.bayes.method},
                    {"mc_shots", cfg.bayes.mc_shots}};
    doc["out_dir"] = cfg.out_dir;
    return doc;
}

std::string config_hash(const ExperimentConfig& cfg) {
    // out_dir says where artifacts land, not what the experiment is; leaving
    // it out keeps the hash stable under --out overrides.
    json doc = config_to_json(cfg);
    doc.erase("out_dir");
    return io::hex64(io::fnv1a64(doc.dump()));
}

}  // namespace qsd
