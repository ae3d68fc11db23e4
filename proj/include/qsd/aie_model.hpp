// Deterministic model of a tiled vector accelerator: maps the quantized MLP
// onto a vector-op schedule, simulates kernel execution, and reports tile
// utilization and power.
//
// Modeling choices (also in the README):
//   * Cycle costs are per-vector-op constants from a calibration profile;
//     there is no instruction-level VLIW slot modeling.
//   * Single-kernel-tile mapping: one kernel tile plus two DMA buffer tiles
//     (input and output ping-pong) per kernel instance. Weights, biases and
//     activation buffers must fit in the buffer tiles' local memory.
//   * The stream fabric has one switch per tile plus one shim switch per
//     column, (rows + 1) * cols switches in total. A kernel instance uses
//     its own tile switch and the shim switch of its column. In placement
//     listings the shim row has row index -1.
//   * Power is a linear model calibrated at a reference operating point:
//     core watts scale with kernel tiles, memory watts with bytes moved per
//     inference relative to the profile's reference traffic.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qsd/fixed_point.hpp"

namespace qsd::aie {

// Tile-array geometry and interface facts.
struct TileArrayConfig {
    int rows = 8;
    int cols = 50;
    int local_mem_bytes = 32768;
    int mem_banks = 8;
    int vector_lanes = 16;  // 16-bit MAC lanes per cycle
    int gmio_in = 32;
    int gmio_out = 32;
    double clock_hz = 1.25e9;

    int total_tiles() const { return rows * cols; }
    int stream_switch_total() const { return (rows + 1) * cols; }
    void validate() const;
};

// Fitted per-op cycle costs and power coefficients. A named profile is
// immutable once published; "vck190-ref" reproduces the measured reference
// numbers (81.6 ns kernel at 1.25 GHz, 0.092 W core + 0.501 W memory).
//
// Fit procedure for the reference profile: per-op costs were chosen first,
// then kernel_overhead_cycles = 102 - compute cycles of the [2,8,8,2]
// reference network (86), giving 16.
struct CalibrationProfile {
    std::string name;
    std::uint64_t cycles_per_vector_mac_group = 0;
    std::uint64_t cycles_per_relu_vector = 0;
    std::uint64_t cycles_per_load_store_vector = 0;
    std::uint64_t kernel_overhead_cycles = 0;
    // Power model calibration.
    double core_w_per_kernel_tile = 0.0;
    double memory_w_at_reference_traffic = 0.0;
    std::uint64_t reference_traffic_bytes = 0;
};

const CalibrationProfile& vck190_ref_profile();
// Zero-cost profile; total cycles collapse to kernel_overhead_cycles.
const CalibrationProfile& zero_profile();
// Throws ConfigError when the name is unknown.
const CalibrationProfile& find_profile(std::string_view name);
std::vector<std::string> profile_names();

enum class VectorOpKind { load_vector, mac_group, relu_vector, store_vector };

const char* to_string(VectorOpKind kind);

struct VectorOp {
    VectorOpKind kind = VectorOpKind::mac_group;
    int layer = 0;       // 0-based weighted-layer index
    int lanes = 0;
    int src_buffer = 0;  // buffer ids: 0 input ping-pong, 1 activations,
    int dst_buffer = 0;  // 2 weights, 3 output ping-pong
    std::uint64_t cycles = 0;
    std::uint64_t bytes_moved = 0;
};

struct TilesUsed {
    int kernel = 0;
    int buffer = 0;
    int stream = 0;
};

// Ordered vector-op list for one inference plus its resource footprint.
struct KernelSchedule {
    std::vector<VectorOp> ops;
    std::uint64_t total_cycles = 0;  // = sum of op costs + kernel overhead
    std::uint64_t buffer_footprint_bytes = 0;
    TilesUsed tiles_used;
    QuantizedMlp model;
    int vector_lanes = 16;
    double clock_hz = 1.25e9;
    std::string profile_name;
    int replicas = 1;

    std::uint64_t compute_cycles() const;
    std::uint64_t traffic_bytes() const;  // per inference, all replicas
    double kernel_ns() const {
        return static_cast<double>(total_cycles) * 1e9 / clock_hz;
    }
};

// Decomposes each layer's matrix-vector product into
// ceil(h_in/lanes) * h_out MAC groups plus per-layer ReLU and load/store
// vector ops, and totals cycles per the calibration profile. Throws
// PlacementError (with byte accounting) when the model does not fit the
// buffer tiles.
KernelSchedule map_to_schedule(const QuantizedMlp& model,
                               const TileArrayConfig& array,
                               const CalibrationProfile& calib);

// Toy linear scaling helper: k independent copies of the kernel running in
// parallel on disjoint tiles. Cycles stay constant; tiles and traffic scale.
// Replicas placed in the same column share that column's shim switch.
KernelSchedule replicate_schedule(const KernelSchedule& schedule, int copies,
                                  const TileArrayConfig& array);

struct KernelRun {
    std::vector<StateLabel> labels;
    double kernel_ns_per_shot = 0.0;  // constant across shots by construction
    std::uint64_t saturation_count = 0;
};

// Executes the schedule with lane-chunked fixed-point semantics identical to
// forward_fixed_scalar; labels are the argmax of the fixed logits.
KernelRun simulate_kernel(const KernelSchedule& schedule,
                          const std::vector<std::vector<std::int16_t>>& shots);

struct TilePlacement {
    int row = 0;  // -1 = shim row (stream switches only)
    int col = 0;
    std::string role;  // "kernel" | "buffer" | "stream"
};

struct UtilizationReport {
    double kernel_tile_pct = 0.0;
    double buffer_tile_pct = 0.0;
    double stream_tile_pct = 0.0;
    int kernel_tiles_used = 0;
    int buffer_tiles_used = 0;
    int stream_switches_used = 0;
    int kernel_tiles_total = 0;
    int buffer_tiles_total = 0;
    int stream_switches_total = 0;
    std::vector<TilePlacement> placement;
};

// Percentages are 100 * used / total per resource class; kernel and buffer
// classes count against total tiles, the stream class against
// (rows + 1) * cols switches. Placement fills column-major from (0, 0),
// kernels first, then buffers, confined to a contiguous region.
UtilizationReport compute_utilization(const KernelSchedule& schedule,
                                      const TileArrayConfig& array);

struct PowerEstimate {
    double core_w = 0.0;
    double memory_w = 0.0;
    double total_w = 0.0;  // = core_w + memory_w
    std::string model = "linear-calibrated";
};

// core_w = kernel tiles * core coefficient; memory_w = memory coefficient
// scaled by traffic relative to the profile's reference traffic.
PowerEstimate estimate_power(const UtilizationReport& utilization,
                             const KernelSchedule& schedule,
                             const CalibrationProfile& calib);

}  // namespace qsd::aie
