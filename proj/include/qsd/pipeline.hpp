// Discrete-event model of the three-stage streaming dataflow around the
// kernel: MM2S DMA -> kernel -> S2MM DMA, joined by bounded FIFOs with
// blocking-after-service backpressure.
//
// Overhead accounting:
//   * overlap enabled: main_overhead_cycles is paid once when the pipeline
//     fills; afterwards stages overlap and steady-state throughput is set by
//     the slowest stage.
//   * overlap disabled: the host serializes shots (a new shot enters only
//     after the previous one drained) and pays main_overhead_cycles per shot.
//   Both modes coincide at shots == 1.
// init_cycles models one-time platform bring-up and is reported separately,
// outside the makespan.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsd/aie_model.hpp"

namespace qsd::aie {

struct StageConfig {
    std::uint64_t cycles = 0;
    int fifo_depth = 4;
};

struct StreamPipelineConfig {
    StageConfig mm2s = {10, 4};
    StageConfig kernel = {0, 4};  // cycles 0 = take schedule.total_cycles
    StageConfig s2mm = {10, 4};
    std::uint64_t main_overhead_cycles = 50;
    std::uint64_t init_cycles = 1000;
    bool overlap_enabled = true;

    void validate() const;  // ConfigError on fifo_depth < 1
};

struct FifoStats {
    std::string name;
    int depth = 0;
    std::uint64_t pushes = 0;
    std::uint64_t pops = 0;
    int max_occupancy = 0;
};

struct StageStats {
    std::string name;
    std::uint64_t cycles_per_item = 0;
    std::uint64_t busy_cycles = 0;
    std::uint64_t blocked_cycles = 0;
    std::uint64_t items = 0;
};

struct PipelineTrace {
    std::vector<FifoStats> fifos;    // host->mm2s, mm2s->kernel, kernel->s2mm
    std::vector<StageStats> stages;  // mm2s, kernel, s2mm
    std::vector<std::uint64_t> departure_cycle;  // per shot, in exit order
    std::uint64_t makespan_cycles = 0;
    std::uint64_t service_events = 0;
};

struct LatencyReport {
    double init_ns = 0.0;
    double kernel_ns = 0.0;  // kernel stage service time
    double main_ns_per_iteration = 0.0;
    double end_to_end_ns_per_shot = 0.0;  // makespan / shots
    double steady_state_throughput_shots_per_s = 0.0;
    std::uint64_t makespan_cycles = 0;
    std::uint64_t shots = 0;
    bool overlap_enabled = true;
};

LatencyReport simulate_pipeline(const KernelSchedule& schedule,
                                const StreamPipelineConfig& config,
                                std::uint64_t shots);

// Same simulation, also filling *trace with FIFO and stage statistics.
LatencyReport simulate_pipeline_detailed(const KernelSchedule& schedule,
                                         const StreamPipelineConfig& config,
                                         std::uint64_t shots,
                                         PipelineTrace* trace);

}  // namespace qsd::aie
