#include "qsd/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <system_error>

namespace qsd::io {

namespace fs = std::filesystem;

// --- atomic output -------------------------------------------------------

AtomicFile::AtomicFile(const fs::path& path)
    : final_path_(path), partial_path_(path.string() + ".partial") {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    out_.open(partial_path_, std::ios::binary | std::ios::trunc);
    if (!out_) {
        throw InputError("cannot open '" + partial_path_.string() +
                         "' for writing");
    }
}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        fs::remove(partial_path_, ec);
    }
}

void AtomicFile::commit() {
    out_.flush();
    if (!out_) {
        throw InputError("write failed for '" + partial_path_.string() + "'");
    }
    out_.close();
    std::error_code ec;
    fs::rename(partial_path_, final_path_, ec);
    if (ec) {
        throw InputError("cannot move '" + partial_path_.string() +
                         "' into place: " + ec.message());
    }
    committed_ = true;
}

void write_text_atomic(const fs::path& path, std::string_view text) {
    AtomicFile file(path);
    file.stream().write(text.data(),
                        static_cast<std::streamsize>(text.size()));
    file.commit();
}

void write_json_atomic(const fs::path& path, const nlohmann::json& value) {
    write_text_atomic(path, value.dump(2) + "\n");
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw InputError("invalid JSON in '" + path.string() +
                         "': " + err.what());
    }
    return value;
}

// --- little-endian primitives --------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {
        static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
        static_cast<char>((v >> 16) & 0xff),
        static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::ostream& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_i16(std::ostream& out, std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    const char bytes[2] = {static_cast<char>(u & 0xff),
                           static_cast<char>((u >> 8) & 0xff)};
    out.write(bytes, 2);
}

[[noreturn]] void truncated(const fs::path& path) {
    throw InputError("'" + path.string() + "' is truncated or corrupt");
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) truncated(path);
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const fs::path& path) {
    const std::uint64_t lo = get_u32(in, path);
    const std::uint64_t hi = get_u32(in, path);
    return lo | (hi << 32);
}

double get_f64(std::istream& in, const fs::path& path) {
    return std::bit_cast<double>(get_u64(in, path));
}

std::int16_t get_i16(std::istream& in, const fs::path& path) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    if (!in) truncated(path);
    const auto u = static_cast<std::uint16_t>(
        static_cast<std::uint16_t>(bytes[0]) |
        (static_cast<std::uint16_t>(bytes[1]) << 8));
    return static_cast<std::int16_t>(u);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(std::string_view field, const fs::path& path,
                    std::size_t line) {
    double value = 0.0;
    const auto [ptr, err] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (err != std::errc{} || ptr != field.data() + field.size()) {
        throw InputError("'" + path.string() + "' line " +
                         std::to_string(line) + ": bad number '" +
                         std::string(field) + "'");
    }
    return value;
}

int parse_int(std::string_view field, const fs::path& path,
              std::size_t line) {
    int value = 0;
    const auto [ptr, err] =
        std::from_chars(field.data(), field.data() + field.size(), value);
    if (err != std::errc{} || ptr != field.data() + field.size()) {
        throw InputError("'" + path.string() + "' line " +
                         std::to_string(line) + ": bad integer '" +
                         std::string(field) + "'");
    }
    return value;
}

constexpr char kTraceMagic[8] = {'Q', 'S', 'D', 'T', 'R', 'A', 'C', 'E'};
constexpr char kQmlpMagic[8] = {'Q', 'S', 'D', 'Q', 'M', 'L', 'P', '1'};

}  // namespace

// --- datasets -------------------------------------------------------------

void save_dataset_csv(const fs::path& path, const Dataset& data) {
    if (data.mode != ShotMode::integrated) {
        throw InputError(
            "dataset is in trace mode; use the trace container");
    }
    AtomicFile file(path);
    std::ostream& out = file.stream();
    out << "i,q,label\n";
    for (std::size_t k = 0; k < data.size(); ++k) {
        out << format_double(data.points[k].i) << ','
            << format_double(data.points[k].q) << ',' << data.labels[k].index
            << '\n';
    }
    file.commit();
}

Dataset load_dataset_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != "i,q,label") {
        throw InputError("'" + path.string() +
                         "': expected header 'i,q,label'");
    }
    Dataset data;
    data.mode = ShotMode::integrated;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 =
            c1 == std::string::npos ? std::string::npos
                                    : line.find(',', c1 + 1);
        if (c2 == std::string::npos) {
            throw InputError("'" + path.string() + "' line " +
                             std::to_string(line_no) + ": expected 3 fields");
        }
        const std::string_view sv(line);
        IQPoint p{parse_double(sv.substr(0, c1), path, line_no),
                  parse_double(sv.substr(c1 + 1, c2 - c1 - 1), path, line_no)};
        const int label = parse_int(sv.substr(c2 + 1), path, line_no);
        if (!p.finite() || label < 0) {
            throw InputError("'" + path.string() + "' line " +
                             std::to_string(line_no) + ": invalid shot");
        }
        data.points.push_back(p);
        data.labels.push_back(StateLabel{label});
        data.dimension = std::max(data.dimension, label + 1);
    }
    if (data.empty()) {
        throw InputError("'" + path.string() + "' contains no shots");
    }
    return data;
}

void save_dataset_trace(const fs::path& path, const Dataset& data) {
    if (data.mode != ShotMode::trace) {
        throw InputError("dataset is integrated; use the CSV container");
    }
    const std::size_t length =
        data.traces.empty() ? 0 : data.traces.front().samples.size();
    const double period =
        data.traces.empty() ? 1.0 : data.traces.front().sample_period_ns;
    for (const ReadoutTrace& t : data.traces) {
        if (t.samples.size() != length || t.sample_period_ns != period) {
            throw InputError("trace container requires uniform trace shape");
        }
    }
    AtomicFile file(path);
    std::ostream& out = file.stream();
    out.write(kTraceMagic, 8);
    put_u32(out, 1);  // version
    put_u32(out, 0);  // reserved
    put_u32(out, static_cast<std::uint32_t>(data.dimension));
    put_u32(out, static_cast<std::uint32_t>(length));
    put_u64(out, data.size());
    put_f64(out, period);
    for (std::size_t k = 0; k < data.size(); ++k) {
        put_u32(out, static_cast<std::uint32_t>(data.labels[k].index));
        for (const IQPoint& s : data.traces[k].samples) {
            put_f64(out, s.i);
            put_f64(out, s.q);
        }
    }
    file.commit();
}

Dataset load_dataset_trace(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kTraceMagic)) {
        throw InputError("'" + path.string() + "' is not a trace container");
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != 1) {
        throw InputError("'" + path.string() + "': unsupported version " +
                         std::to_string(version));
    }
    get_u32(in, path);  // reserved
    Dataset data;
    data.mode = ShotMode::trace;
    data.dimension = static_cast<int>(get_u32(in, path));
    const std::uint32_t length = get_u32(in, path);
    const std::uint64_t count = get_u64(in, path);
    const double period = get_f64(in, path);
    data.traces.reserve(count);
    data.labels.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto label = static_cast<int>(get_u32(in, path));
        ReadoutTrace trace;
        trace.sample_period_ns = period;
        trace.samples.reserve(length);
        for (std::uint32_t s = 0; s < length; ++s) {
            const double i = get_f64(in, path);
            const double q = get_f64(in, path);
            trace.samples.push_back({i, q});
        }
        data.labels.push_back(StateLabel{label});
        data.traces.push_back(std::move(trace));
    }
    return data;
}

void save_dataset(const fs::path& path, const Dataset& data) {
    if (data.mode == ShotMode::trace) {
        save_dataset_trace(path, data);
    } else {
        save_dataset_csv(path, data);
    }
}

Dataset load_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    char magic[8] = {};
    in.read(magic, 8);
    const bool is_trace = in && std::equal(magic, magic + 8, kTraceMagic);
    in.close();
    return is_trace ? load_dataset_trace(path) : load_dataset_csv(path);
}

// --- MLP models ------------------------------------------------------------

void save_mlp_json(const fs::path& path, const MlpModel& model) {
    model.validate();
    nlohmann::json doc;
    doc["format"] = "qsd-mlp";
    doc["version"] = 1;
    doc["dims"] = model.dims;
    nlohmann::json layers = nlohmann::json::array();
    for (const MlpLayer& layer : model.layers) {
        layers.push_back({{"weights", layer.weights},
                          {"biases", layer.biases}});
    }
    doc["layers"] = layers;
    write_json_atomic(path, doc);
}

MlpModel load_mlp_json(const fs::path& path) {
    const nlohmann::json doc = read_json_file(path);
    try {
        if (doc.at("format").get<std::string>() != "qsd-mlp") {
            throw InputError("'" + path.string() + "' is not a qsd-mlp file");
        }
        if (doc.at("version").get<int>() != 1) {
            throw InputError("'" + path.string() +
                             "': unsupported qsd-mlp version");
        }
        MlpModel model;
        const auto dims = doc.at("dims").get<std::vector<int>>();
        if (dims.size() != model.dims.size()) {
            throw InputError("'" + path.string() + "': dims must have 4 entries");
        }
        std::copy(dims.begin(), dims.end(), model.dims.begin());
        const nlohmann::json& layers = doc.at("layers");
        if (layers.size() != model.layers.size()) {
            throw InputError("'" + path.string() + "': expected 3 layers");
        }
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            model.layers[l].weights =
                layers[l].at("weights").get<std::vector<double>>();
            model.layers[l].biases =
                layers[l].at("biases").get<std::vector<double>>();
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& err) {
        throw InputError("'" + path.string() + "': " + err.what());
    }
}

void save_quantized_mlp(const fs::path& path, const QuantizedMlp& model) {
    model.validate();
    AtomicFile file(path);
    std::ostream& out = file.stream();
    out.write(kQmlpMagic, 8);
    put_u32(out, 1);  // version
    put_u32(out, static_cast<std::uint32_t>(model.fractional_bits));
    for (int d : model.dims) put_u32(out, static_cast<std::uint32_t>(d));
    for (const QuantizedLayer& layer : model.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.output_shift));
        for (std::int16_t w : layer.weights) put_i16(out, w);
        for (std::int16_t b : layer.biases) put_i16(out, b);
    }
    file.commit();
}

QuantizedMlp load_quantized_mlp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kQmlpMagic)) {
        throw InputError("'" + path.string() +
                         "' is not a quantized model file");
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != 1) {
        throw InputError("'" + path.string() + "': unsupported version " +
                         std::to_string(version));
    }
    QuantizedMlp model;
    model.fractional_bits = static_cast<int>(get_u32(in, path));
    for (int& d : model.dims) d = static_cast<int>(get_u32(in, path));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        QuantizedLayer& layer = model.layers[l];
        layer.output_shift = static_cast<int>(get_u32(in, path));
        const std::size_t h_in = static_cast<std::size_t>(model.dims[l]);
        const std::size_t h_out = static_cast<std::size_t>(model.dims[l + 1]);
        layer.weights.resize(h_in * h_out);
        layer.biases.resize(h_out);
        for (std::int16_t& w : layer.weights) w = get_i16(in, path);
        for (std::int16_t& b : layer.biases) b = get_i16(in, path);
    }
    model.validate();
    return model;
}

// --- reports ---------------------------------------------------------------

nlohmann::json confusion_to_json(const ConfusionMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int p = 0; p < m.dimension; ++p) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < m.dimension; ++a) row.push_back(m.at(p, a));
        rows.push_back(row);
    }
    return {{"dimension", m.dimension},
            {"total", m.total},
            {"fidelity", m.fidelity()},
            {"counts", rows}};
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "prepared";
    for (int a = 0; a < m.dimension; ++a) out << ",assigned_" << a;
    out << '\n';
    for (int p = 0; p < m.dimension; ++p) {
        out << p;
        for (int a = 0; a < m.dimension; ++a) out << ',' << m.at(p, a);
        out << '\n';
    }
    return out.str();
}

nlohmann::json latency_to_json(const aie::LatencyReport& r) {
    return {{"init_ns", r.init_ns},
            {"kernel_ns", r.kernel_ns},
            {"main_ns_per_iteration", r.main_ns_per_iteration},
            {"end_to_end_ns_per_shot", r.end_to_end_ns_per_shot},
            {"steady_state_throughput_shots_per_s",
             r.steady_state_throughput_shots_per_s},
            {"makespan_cycles", r.makespan_cycles},
            {"shots", r.shots},
            {"overlap_enabled", r.overlap_enabled}};
}

nlohmann::json utilization_to_json(const aie::UtilizationReport& r) {
    nlohmann::json placement = nlohmann::json::array();
    for (const aie::TilePlacement& p : r.placement) {
        placement.push_back(
            {{"row", p.row}, {"col", p.col}, {"role", p.role}});
    }
    return {{"kernel_tile_pct", r.kernel_tile_pct},
            {"buffer_tile_pct", r.buffer_tile_pct},
            {"stream_tile_pct", r.stream_tile_pct},
            {"kernel_tiles_used", r.kernel_tiles_used},
            {"buffer_tiles_used", r.buffer_tiles_used},
            {"stream_switches_used", r.stream_switches_used},
            {"kernel_tiles_total", r.kernel_tiles_total},
            {"buffer_tiles_total", r.buffer_tiles_total},
            {"stream_switches_total", r.stream_switches_total},
            {"placement", placement}};
}

nlohmann::json power_to_json(const aie::PowerEstimate& p) {
    return {{"core_w", p.core_w},
            {"memory_w", p.memory_w},
            {"total_w", p.total_w},
            {"model", p.model}};
}

nlohmann::json schedule_to_json(const aie::KernelSchedule& s) {
    std::size_t op_counts[4] = {0, 0, 0, 0};
    for (const aie::VectorOp& op : s.ops) {
        op_counts[static_cast<int>(op.kind)] += 1;
    }
    return {{"profile", s.profile_name},
            {"total_cycles", s.total_cycles},
            {"compute_cycles", s.compute_cycles()},
            {"overhead_cycles", s.total_cycles - s.compute_cycles()},
            {"kernel_ns", s.kernel_ns()},
            {"clock_hz", s.clock_hz},
            {"vector_lanes", s.vector_lanes},
            {"replicas", s.replicas},
            {"buffer_footprint_bytes", s.buffer_footprint_bytes},
            {"traffic_bytes_per_inference", s.traffic_bytes()},
            {"dims", s.model.dims},
            {"tiles_used",
             {{"kernel", s.tiles_used.kernel},
              {"buffer", s.tiles_used.buffer},
              {"stream", s.tiles_used.stream}}},
            {"op_counts",
             {{"load_vector", op_counts[0]},
              {"mac_group", op_counts[1]},
              {"relu_vector", op_counts[2]},
              {"store_vector", op_counts[3]}}}};
}

std::string placement_to_csv(const aie::UtilizationReport& r) {
    std::ostringstream out;
    out << "row,col,role\n";
    for (const aie::TilePlacement& p : r.placement) {
        out << p.row << ',' << p.col << ',' << p.role << '\n';
    }
    return out.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xCBF29CE484222325ull;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace qsd::io
