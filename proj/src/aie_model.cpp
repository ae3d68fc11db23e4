#include "qsd/aie_model.hpp"

#include <algorithm>
#include <cstdio>

#include "qsd/common.hpp"

namespace qsd::aie {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
    return (a + b - 1) / b;
}

std::string format_bytes_overflow(std::uint64_t need, std::uint64_t have,
                                  int tiles, int per_tile) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "model footprint %llu bytes exceeds buffer capacity %llu "
                  "bytes (%d tiles x %d bytes)",
                  static_cast<unsigned long long>(need),
                  static_cast<unsigned long long>(have), tiles, per_tile);
    return buf;
}

}  // namespace

void TileArrayConfig::validate() const {
    if (rows < 1 || cols < 1) {
        throw ConfigError("tile array must have at least one row and column");
    }
    if (local_mem_bytes < 1 || mem_banks < 1) {
        throw ConfigError("tile local memory configuration is invalid");
    }
    if (vector_lanes < 1) {
        throw ConfigError("vector_lanes must be at least 1");
    }
    if (gmio_in < 1 || gmio_out < 1) {
        throw ConfigError("GMIO port counts must be at least 1");
    }
    if (!(clock_hz > 0.0)) {
        throw ConfigError("clock_hz must be positive");
    }
}

const CalibrationProfile& vck190_ref_profile() {
    static const CalibrationProfile profile = {
        "vck190-ref",
        4,   // cycles_per_vector_mac_group
        1,   // cycles_per_relu_vector
        2,   // cycles_per_load_store_vector
        16,  // kernel_overhead_cycles (fit: 102 total - 86 compute)
        0.092,
        0.501,
        1472,
    };
    return profile;
}

const CalibrationProfile& zero_profile() {
    static const CalibrationProfile profile = {
        "zero", 0, 0, 0, 0, 0.0, 0.0, 1472,
    };
    return profile;
}

const CalibrationProfile& find_profile(std::string_view name) {
    if (name == vck190_ref_profile().name) return vck190_ref_profile();
    if (name == zero_profile().name) return zero_profile();
    throw ConfigError("unknown calibration profile '" + std::string(name) +
                      "' (known: vck190-ref, zero)");
}

std::vector<std::string> profile_names() { return {"vck190-ref", "zero"}; }

const char* to_string(VectorOpKind kind) {
    switch (kind) {
        case VectorOpKind::load_vector: return "load_vector";
        case VectorOpKind::mac_group: return "mac_group";
        case VectorOpKind::relu_vector: return "relu_vector";
        case VectorOpKind::store_vector: return "store_vector";
    }
    return "unknown";
}

std::uint64_t KernelSchedule::compute_cycles() const {
    std::uint64_t sum = 0;
    for (const VectorOp& op : ops) sum += op.cycles;
    return sum;
}

std::uint64_t KernelSchedule::traffic_bytes() const {
    std::uint64_t sum = 0;
    for (const VectorOp& op : ops) sum += op.bytes_moved;
    return sum * static_cast<std::uint64_t>(replicas);
}

KernelSchedule map_to_schedule(const QuantizedMlp& model,
                               const TileArrayConfig& array,
                               const CalibrationProfile& calib) {
    array.validate();
    model.validate();
    const std::uint64_t lanes =
        static_cast<std::uint64_t>(array.vector_lanes);
    const std::uint64_t lane_bytes = lanes * sizeof(std::int16_t);

    KernelSchedule sched;
    sched.model = model;
    sched.vector_lanes = array.vector_lanes;
    sched.clock_hz = array.clock_hz;
    sched.profile_name = calib.name;
    sched.replicas = 1;

    const int n_layers = static_cast<int>(model.layers.size());
    std::uint64_t param_bytes = 0;
    for (int l = 0; l < n_layers; ++l) {
        const std::uint64_t h_in = static_cast<std::uint64_t>(model.dims[l]);
        const std::uint64_t h_out =
            static_cast<std::uint64_t>(model.dims[l + 1]);
        param_bytes += (h_in * h_out + h_out) * sizeof(std::int16_t);
        const std::uint64_t in_chunks = ceil_div(h_in, lanes);
        const std::uint64_t out_chunks = ceil_div(h_out, lanes);
        const int src = l == 0 ? 0 : 1;
        const int dst = l == n_layers - 1 ? 3 : 1;

        for (std::uint64_t c = 0; c < in_chunks; ++c) {
            sched.ops.push_back({VectorOpKind::load_vector, l,
                                 array.vector_lanes, src, 1,
                                 calib.cycles_per_load_store_vector,
                                 lane_bytes});
        }
        // One MAC group per (output neuron, input chunk): reads a weight
        // chunk and an activation chunk.
        for (std::uint64_t j = 0; j < h_out; ++j) {
            for (std::uint64_t c = 0; c < in_chunks; ++c) {
                sched.ops.push_back({VectorOpKind::mac_group, l,
                                     array.vector_lanes, 2, 1,
                                     calib.cycles_per_vector_mac_group,
                                     2 * lane_bytes});
            }
        }
        if (l < n_layers - 1) {
            for (std::uint64_t c = 0; c < out_chunks; ++c) {
                sched.ops.push_back({VectorOpKind::relu_vector, l,
                                     array.vector_lanes, 1, 1,
                                     calib.cycles_per_relu_vector,
                                     2 * lane_bytes});
            }
        }
        for (std::uint64_t c = 0; c < out_chunks; ++c) {
            sched.ops.push_back({VectorOpKind::store_vector, l,
                                 array.vector_lanes, 1, dst,
                                 calib.cycles_per_load_store_vector,
                                 lane_bytes});
        }
    }

    sched.total_cycles = sched.compute_cycles() + calib.kernel_overhead_cycles;

    // Parameters plus double-buffered input and output activation vectors
    // must fit in the two buffer tiles.
    std::uint64_t max_width = 0;
    for (int d : model.dims) {
        max_width = std::max(max_width, static_cast<std::uint64_t>(d));
    }
    const std::uint64_t act_bytes = 2 * 2 * max_width * sizeof(std::int16_t);
    sched.buffer_footprint_bytes = param_bytes + act_bytes;
    const std::uint64_t capacity =
        2ull * static_cast<std::uint64_t>(array.local_mem_bytes);
    if (sched.buffer_footprint_bytes > capacity) {
        throw PlacementError(format_bytes_overflow(
            sched.buffer_footprint_bytes, capacity, 2, array.local_mem_bytes));
    }

    sched.tiles_used.kernel = 1;
    sched.tiles_used.buffer = 2;
    sched.tiles_used.stream = 2;  // own tile switch + column shim switch
    return sched;
}

KernelSchedule replicate_schedule(const KernelSchedule& schedule, int copies,
                                  const TileArrayConfig& array) {
    if (copies < 1) {
        throw ConfigError("replica count must be at least 1");
    }
    array.validate();
    KernelSchedule out = schedule;
    out.replicas = schedule.replicas * copies;
    const int k = out.replicas;
    const int tiles_needed = 3 * k;
    if (tiles_needed > array.total_tiles()) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "replicated design needs %d tiles, array has %d",
                      tiles_needed, array.total_tiles());
        throw PlacementError(buf);
    }
    out.tiles_used.kernel = k;
    out.tiles_used.buffer = 2 * k;
    out.tiles_used.stream =
        k + static_cast<int>(ceil_div(static_cast<std::uint64_t>(k),
                                      static_cast<std::uint64_t>(array.rows)));
    return out;
}

KernelRun simulate_kernel(const KernelSchedule& schedule,
                          const std::vector<std::vector<std::int16_t>>& shots) {
    schedule.model.validate();
    const QuantizedMlp& model = schedule.model;
    const int lanes = schedule.vector_lanes;
    const std::size_t n_in = static_cast<std::size_t>(model.dims[0]);

    KernelRun run;
    run.labels.reserve(shots.size());
    run.kernel_ns_per_shot = schedule.kernel_ns();

    std::vector<std::int64_t> lane_acc(static_cast<std::size_t>(lanes));
    std::vector<std::int16_t> cur;
    std::vector<std::int16_t> next;
    for (std::size_t s = 0; s < shots.size(); ++s) {
        if (shots[s].size() != n_in) {
            throw InputError("shot feature width does not match model input");
        }
        cur = shots[s];
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const QuantizedLayer& layer = model.layers[l];
            const std::size_t h_in = static_cast<std::size_t>(model.dims[l]);
            const std::size_t h_out =
                static_cast<std::size_t>(model.dims[l + 1]);
            next.assign(h_out, 0);
            const bool relu = l + 1 < model.layers.size();
            for (std::size_t j = 0; j < h_out; ++j) {
                // Lane-parallel MAC groups: partial sums per lane, then a
                // horizontal reduce. Exact in 64-bit, so this matches the
                // scalar reference bit for bit.
                std::fill(lane_acc.begin(), lane_acc.end(), 0);
                const std::int16_t* w = &layer.weights[j * h_in];
                for (std::size_t base = 0; base < h_in;
                     base += static_cast<std::size_t>(lanes)) {
                    const std::size_t end =
                        std::min(h_in, base + static_cast<std::size_t>(lanes));
                    for (std::size_t i = base; i < end; ++i) {
                        lane_acc[i - base] +=
                            static_cast<std::int64_t>(w[i]) *
                            static_cast<std::int64_t>(cur[i]);
                    }
                }
                std::int64_t acc = 0;
                for (std::int64_t part : lane_acc) acc += part;
                acc += static_cast<std::int64_t>(layer.biases[j])
                       << layer.output_shift;
                std::int64_t y = fixed_detail::shift_round_half_up(
                    acc, layer.output_shift);
                std::int16_t q =
                    fixed_detail::saturate16(y, &run.saturation_count);
                if (relu && q < 0) q = 0;
                next[j] = q;
            }
            cur.swap(next);
        }
        int best = 0;
        for (std::size_t j = 1; j < cur.size(); ++j) {
            if (cur[j] > cur[best]) best = static_cast<int>(j);
        }
        run.labels.push_back(StateLabel{best});
    }
    return run;
}

UtilizationReport compute_utilization(const KernelSchedule& schedule,
                                      const TileArrayConfig& array) {
    array.validate();
    const int k = schedule.replicas;
    const int tiles_needed = 3 * k;
    if (tiles_needed > array.total_tiles()) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "design needs %d tiles, array has %d", tiles_needed,
                      array.total_tiles());
        throw PlacementError(buf);
    }

    UtilizationReport report;
    report.kernel_tiles_used = schedule.tiles_used.kernel;
    report.buffer_tiles_used = schedule.tiles_used.buffer;
    report.stream_switches_used = schedule.tiles_used.stream;
    report.kernel_tiles_total = array.total_tiles();
    report.buffer_tiles_total = array.total_tiles();
    report.stream_switches_total = array.stream_switch_total();
    report.kernel_tile_pct =
        100.0 * report.kernel_tiles_used / report.kernel_tiles_total;
    report.buffer_tile_pct =
        100.0 * report.buffer_tiles_used / report.buffer_tiles_total;
    report.stream_tile_pct =
        100.0 * report.stream_switches_used / report.stream_switches_total;

    // Column-major fill from (0, 0): kernel tiles first, buffers after.
    for (int i = 0; i < report.kernel_tiles_used; ++i) {
        report.placement.push_back({i % array.rows, i / array.rows, "kernel"});
    }
    for (int i = report.kernel_tiles_used;
         i < report.kernel_tiles_used + report.buffer_tiles_used; ++i) {
        report.placement.push_back({i % array.rows, i / array.rows, "buffer"});
    }
    // Stream switches: one at each kernel tile plus the shim switch (row -1)
    // of each column holding kernel tiles.
    for (int i = 0; i < report.kernel_tiles_used; ++i) {
        report.placement.push_back({i % array.rows, i / array.rows, "stream"});
    }
    const int kernel_cols = static_cast<int>(
        ceil_div(static_cast<std::uint64_t>(report.kernel_tiles_used),
                 static_cast<std::uint64_t>(array.rows)));
    for (int c = 0; c < kernel_cols; ++c) {
        report.placement.push_back({-1, c, "stream"});
    }
    return report;
}

PowerEstimate estimate_power(const UtilizationReport& utilization,
                             const KernelSchedule& schedule,
                             const CalibrationProfile& calib) {
    if (calib.reference_traffic_bytes == 0) {
        throw ConfigError("calibration profile has zero reference traffic");
    }
    PowerEstimate power;
    power.core_w =
        utilization.kernel_tiles_used * calib.core_w_per_kernel_tile;
    power.memory_w = calib.memory_w_at_reference_traffic *
                     (static_cast<double>(schedule.traffic_bytes()) /
                      static_cast<double>(calib.reference_traffic_bytes));
    power.total_w = power.core_w + power.memory_w;
    return power;
}

}  // namespace qsd::aie
