#include "qsd/pipeline.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

#include "qsd/common.hpp"

namespace qsd::aie {

void StreamPipelineConfig::validate() const {
    if (mm2s.fifo_depth < 1 || kernel.fifo_depth < 1 || s2mm.fifo_depth < 1) {
        throw ConfigError("pipeline fifo_depth must be at least 1");
    }
}

namespace {

constexpr int kStages = 3;

struct Fifo {
    int depth = 0;
    std::deque<std::uint64_t> items;
    std::uint64_t pushes = 0;
    std::uint64_t pops = 0;
    int max_occupancy = 0;

    bool has_room() const {
        return static_cast<int>(items.size()) < depth;
    }
    void push(std::uint64_t shot) {
        items.push_back(shot);
        ++pushes;
        max_occupancy =
            std::max(max_occupancy, static_cast<int>(items.size()));
    }
    std::uint64_t pop() {
        std::uint64_t shot = items.front();
        items.pop_front();
        ++pops;
        return shot;
    }
};

struct Stage {
    std::uint64_t service = 0;
    bool busy = false;
    bool blocked = false;  // service done, waiting for downstream room
    std::uint64_t item = 0;
    std::uint64_t blocked_since = 0;
    std::uint64_t busy_cycles = 0;
    std::uint64_t blocked_cycles = 0;
    std::uint64_t items_done = 0;
};

// Event kinds, ordered so that simultaneous events resolve downstream-first:
// a departure frees FIFO room before upstream stages try to push at the
// same cycle.
enum EventKind { ev_complete_s2mm = 0, ev_complete_kernel = 1,
                 ev_complete_mm2s = 2, ev_admission = 3 };

struct Event {
    std::uint64_t time = 0;
    int kind = 0;
    std::uint64_t seq = 0;
    bool operator>(const Event& other) const {
        return std::tie(time, kind, seq) >
               std::tie(other.time, other.kind, other.seq);
    }
};

struct Simulation {
    std::uint64_t shots = 0;
    bool overlap = true;
    std::uint64_t overhead = 0;
    // fifo[i] feeds stage i; fifo[kStages] is the sink (never full).
    Fifo fifo[kStages + 1];
    Stage stage[kStages];
    std::uint64_t next_shot = 0;        // next shot the host may inject
    std::uint64_t host_ready_at = 0;    // earliest injection time
    std::uint64_t departed = 0;
    std::vector<std::uint64_t> departures;
    std::uint64_t service_events = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
    std::uint64_t seq = 0;

    void schedule(std::uint64_t time, int kind) {
        queue.push({time, kind, seq++});
    }

    void start_stage(int i, std::uint64_t now) {
        Stage& st = stage[i];
        st.item = fifo[i].pop();
        st.busy = true;
        st.busy_cycles += st.service;
        schedule(now + st.service, ev_complete_mm2s - i);
    }

    // Instantaneous cascade at time `now`: unblock stages whose downstream
    // gained room, start idle stages, and let the host top up fifo[0].
    // Sweeps downstream-first until nothing changes.
    void settle(std::uint64_t now) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (int i = kStages - 1; i >= 0; --i) {
                Stage& st = stage[i];
                if (st.blocked && fifo[i + 1].has_room()) {
                    fifo[i + 1].push(st.item);
                    st.blocked = false;
                    st.blocked_cycles += now - st.blocked_since;
                    changed = true;
                }
                if (!st.busy && !st.blocked && !fifo[i].items.empty()) {
                    start_stage(i, now);
                    changed = true;
                }
            }
            if (next_shot < shots && now >= host_ready_at &&
                fifo[0].has_room() && host_may_inject()) {
                fifo[0].push(next_shot++);
                changed = true;
            }
        }
    }

    bool host_may_inject() const {
        // Without overlap only one shot is in flight at a time.
        return overlap || next_shot == departed;
    }

    void complete(int i, std::uint64_t now) {
        Stage& st = stage[i];
        st.busy = false;
        st.items_done += 1;
        ++service_events;
        if (i == kStages - 1) {
            departures.push_back(now);
            ++departed;
            if (!overlap && next_shot < shots) {
                host_ready_at = now + overhead;
                schedule(host_ready_at, ev_admission);
            }
        } else if (fifo[i + 1].has_room()) {
            fifo[i + 1].push(st.item);
        } else {
            st.blocked = true;
            st.blocked_since = now;
        }
        settle(now);
    }

    std::uint64_t run() {
        schedule(host_ready_at, ev_admission);
        std::uint64_t now = 0;
        while (departed < shots) {
            if (queue.empty()) {
                throw NumericalError("pipeline simulation deadlocked");
            }
            Event ev = queue.top();
            queue.pop();
            now = ev.time;
            if (ev.kind == ev_admission) {
                settle(now);
            } else {
                complete(ev_complete_mm2s - ev.kind, now);
            }
        }
        return departures.back();
    }
};

}  // namespace

// simulate_pipeline_detailed guards against fifo[i + 1] indexing off the end
// by giving stage 2 a sink fifo with infinite room.
LatencyReport simulate_pipeline_detailed(const KernelSchedule& schedule,
                                         const StreamPipelineConfig& config,
                                         std::uint64_t shots,
                                         PipelineTrace* trace) {
    config.validate();
    if (shots < 1) {
        throw InputError("pipeline simulation needs at least one shot");
    }
    if (!(schedule.clock_hz > 0.0)) {
        throw ConfigError("schedule clock_hz must be positive");
    }

    const std::uint64_t kernel_cycles =
        config.kernel.cycles != 0 ? config.kernel.cycles
                                  : schedule.total_cycles;
    const std::uint64_t stage_cycles[kStages] = {config.mm2s.cycles,
                                                 kernel_cycles,
                                                 config.s2mm.cycles};

    Simulation sim;
    sim.shots = shots;
    sim.overlap = config.overlap_enabled;
    sim.overhead = config.main_overhead_cycles;
    sim.host_ready_at = config.main_overhead_cycles;
    for (int i = 0; i < kStages; ++i) {
        sim.stage[i].service = stage_cycles[i];
    }
    sim.fifo[0].depth = config.mm2s.fifo_depth;
    sim.fifo[1].depth = config.kernel.fifo_depth;
    sim.fifo[2].depth = config.s2mm.fifo_depth;
    sim.fifo[3].depth = std::numeric_limits<int>::max();

    const std::uint64_t makespan = sim.run();

    const double ns_per_cycle = 1e9 / schedule.clock_hz;
    std::uint64_t iteration_cycles = 0;
    if (config.overlap_enabled) {
        for (std::uint64_t c : stage_cycles) {
            iteration_cycles = std::max(iteration_cycles, c);
        }
    } else {
        iteration_cycles = config.main_overhead_cycles + stage_cycles[0] +
                           stage_cycles[1] + stage_cycles[2];
    }

    LatencyReport report;
    report.init_ns = static_cast<double>(config.init_cycles) * ns_per_cycle;
    report.kernel_ns = static_cast<double>(kernel_cycles) * ns_per_cycle;
    report.main_ns_per_iteration =
        static_cast<double>(iteration_cycles) * ns_per_cycle;
    report.end_to_end_ns_per_shot =
        static_cast<double>(makespan) * ns_per_cycle /
        static_cast<double>(shots);
    report.steady_state_throughput_shots_per_s =
        iteration_cycles == 0
            ? std::numeric_limits<double>::infinity()
            : schedule.clock_hz / static_cast<double>(iteration_cycles);
    report.makespan_cycles = makespan;
    report.shots = shots;
    report.overlap_enabled = config.overlap_enabled;

    if (trace != nullptr) {
        trace->fifos.clear();
        trace->stages.clear();
        const char* fifo_names[kStages] = {"host->mm2s", "mm2s->kernel",
                                           "kernel->s2mm"};
        const char* stage_names[kStages] = {"mm2s", "kernel", "s2mm"};
        for (int i = 0; i < kStages; ++i) {
            trace->fifos.push_back({fifo_names[i], sim.fifo[i].depth,
                                    sim.fifo[i].pushes, sim.fifo[i].pops,
                                    sim.fifo[i].max_occupancy});
            trace->stages.push_back({stage_names[i], stage_cycles[i],
                                     sim.stage[i].busy_cycles,
                                     sim.stage[i].blocked_cycles,
                                     sim.stage[i].items_done});
        }
        trace->departure_cycle = sim.departures;
        trace->makespan_cycles = makespan;
        trace->service_events = sim.service_events;
    }
    return report;
}

LatencyReport simulate_pipeline(const KernelSchedule& schedule,
                                const StreamPipelineConfig& config,
                                std::uint64_t shots) {
    return simulate_pipeline_detailed(schedule, config, shots, nullptr);
}

}  // namespace qsd::aie
