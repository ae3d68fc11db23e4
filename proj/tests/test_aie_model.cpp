#include <doctest.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "qsd/aie_model.hpp"
#include "qsd/rng.hpp"

using namespace qsd;
using namespace qsd::aie;

namespace {

QuantizedMlp shaped_quantized(const std::array<int, 4>& dims) {
    QuantizedMlp m;
    m.dims = dims;
    m.fractional_bits = 12;
    for (int l = 0; l < 3; ++l) {
        QuantizedLayer& layer = m.layers[static_cast<std::size_t>(l)];
        layer.output_shift = 12;
        layer.weights.assign(
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l)]) *
                static_cast<std::size_t>(dims[static_cast<std::size_t>(l + 1)]),
            0);
        layer.biases.assign(
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l + 1)]), 0);
    }
    return m;
}

QuantizedMlp random_quantized(std::uint64_t seed) {
    QuantizedMlp m = shaped_quantized({2, 8, 8, 2});
    PortableRng rng(seed);
    for (QuantizedLayer& layer : m.layers) {
        for (std::int16_t& w : layer.weights) {
            w = static_cast<std::int16_t>(rng.next_u64() & 0xffff);
        }
        for (std::int16_t& b : layer.biases) {
            b = static_cast<std::int16_t>(rng.next_u64() & 0xffff);
        }
    }
    return m;
}

std::uint64_t count_ops(const KernelSchedule& s, VectorOpKind kind) {
    std::uint64_t n = 0;
    for (const VectorOp& op : s.ops) {
        if (op.kind == kind) ++n;
    }
    return n;
}

}  // namespace

TEST_SUITE("aie-model") {

TEST_CASE("reference network reproduces the published kernel numbers") {
    const TileArrayConfig array;
    const KernelSchedule sched = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), array, vck190_ref_profile());
    CHECK(sched.compute_cycles() == 86);
    CHECK(sched.total_cycles == 102);
    CHECK(sched.kernel_ns() == 81.6);
    CHECK(sched.traffic_bytes() == 1472);
    CHECK(sched.tiles_used.kernel == 1);
    CHECK(sched.tiles_used.buffer == 2);
    CHECK(sched.tiles_used.stream == 2);
    CHECK(sched.replicas == 1);
    CHECK(sched.profile_name == "vck190-ref");

    CHECK(count_ops(sched, VectorOpKind::load_vector) == 3);
    CHECK(count_ops(sched, VectorOpKind::mac_group) == 18);
    CHECK(count_ops(sched, VectorOpKind::relu_vector) == 2);
    CHECK(count_ops(sched, VectorOpKind::store_vector) == 3);
}

TEST_CASE("schedules agree with the counting oracle across shapes") {
    const CalibrationProfile& profile = vck190_ref_profile();
    const std::array<int, 4> shapes[] = {{2, 8, 8, 2},
                                         {2, 16, 8, 2},
                                         {5, 33, 17, 3},
                                         {16, 64, 64, 10},
                                         {1, 1, 1, 1}};
    for (int lanes : {16, 8}) {
        TileArrayConfig array;
        array.vector_lanes = lanes;
        for (const std::array<int, 4>& dims : shapes) {
            const KernelSchedule sched =
                map_to_schedule(shaped_quantized(dims), array, profile);
            const oracle::OpCounts want =
                oracle::expected_op_counts(dims, lanes);
            CHECK(count_ops(sched, VectorOpKind::load_vector) == want.loads);
            CHECK(count_ops(sched, VectorOpKind::mac_group) == want.macs);
            CHECK(count_ops(sched, VectorOpKind::relu_vector) == want.relus);
            CHECK(count_ops(sched, VectorOpKind::store_vector) == want.stores);
            CHECK(sched.total_cycles ==
                  oracle::expected_cycles(want, profile));
        }
    }

    // Hand total for {2,16,8,2}: 3 loads + 26 MACs + 2 ReLUs + 3 stores
    // = 6 + 104 + 2 + 6 = 118 compute + 16 overhead.
    const KernelSchedule wide = map_to_schedule(
        shaped_quantized({2, 16, 8, 2}), TileArrayConfig{}, profile);
    CHECK(wide.total_cycles == 134);
    CHECK(wide.total_cycles >
          map_to_schedule(shaped_quantized({2, 8, 8, 2}), TileArrayConfig{},
                          profile)
              .total_cycles);
}

TEST_CASE("schedule op stream is ordered and addressed per layer") {
    const KernelSchedule sched = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), TileArrayConfig{}, vck190_ref_profile());
    int last_layer = 0;
    for (const VectorOp& op : sched.ops) {
        CHECK(op.layer >= last_layer);
        last_layer = op.layer;
        CHECK(op.lanes == 16);
        if (op.kind == VectorOpKind::load_vector) {
            CHECK(op.src_buffer == (op.layer == 0 ? 0 : 1));
        }
        if (op.kind == VectorOpKind::store_vector) {
            CHECK(op.dst_buffer == (op.layer == 2 ? 3 : 1));
        }
        if (op.kind == VectorOpKind::mac_group) {
            CHECK(op.src_buffer == 2);  // weights
            CHECK(op.bytes_moved == 64);
        }
    }
    // Within layer 0: loads, then MACs, then ReLU, then store.
    CHECK(sched.ops[0].kind == VectorOpKind::load_vector);
    CHECK(sched.ops[1].kind == VectorOpKind::mac_group);
    CHECK(sched.ops[9].kind == VectorOpKind::relu_vector);
    CHECK(sched.ops[10].kind == VectorOpKind::store_vector);
}

TEST_CASE("alternate calibration profiles change only the costs") {
    CalibrationProfile overhead_only;
    overhead_only.name = "overhead-only";
    overhead_only.kernel_overhead_cycles = 7;
    overhead_only.reference_traffic_bytes = 1472;
    const KernelSchedule sched = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), TileArrayConfig{}, overhead_only);
    CHECK(sched.compute_cycles() == 0);
    CHECK(sched.total_cycles == 7);

    const KernelSchedule zero = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), TileArrayConfig{}, zero_profile());
    CHECK(zero.total_cycles == 0);
    CHECK(zero.kernel_ns() == 0.0);

    CHECK(find_profile("vck190-ref").cycles_per_vector_mac_group == 4);
    CHECK_THROWS_WITH_AS(find_profile("nope"), doctest::Contains("known:"),
                         ConfigError);
    CHECK(profile_names().size() == 2);
}

TEST_CASE("models that do not fit the buffer tiles are rejected") {
    // 180x180 weights alone need ~65 KiB plus activations: over the two
    // 32 KiB buffer tiles.
    CHECK_THROWS_WITH_AS(
        map_to_schedule(shaped_quantized({2, 180, 180, 2}), TileArrayConfig{},
                        vck190_ref_profile()),
        doctest::Contains("exceeds buffer capacity"), PlacementError);
}

TEST_CASE("kernel simulation matches the scalar reference bit for bit") {
    const QuantizedMlp model = random_quantized(314);
    const KernelSchedule sched =
        map_to_schedule(model, TileArrayConfig{}, vck190_ref_profile());

    PortableRng rng(315);
    std::vector<std::vector<std::int16_t>> shots;
    for (int k = 0; k < 200; ++k) {
        std::vector<std::int16_t> x(2);
        for (std::int16_t& v : x) {
            v = static_cast<std::int16_t>(rng.next_u64() & 0xffff);
        }
        shots.push_back(std::move(x));
    }
    const KernelRun run = simulate_kernel(sched, shots);
    REQUIRE(run.labels.size() == shots.size());
    CHECK(run.kernel_ns_per_shot == sched.kernel_ns());

    std::uint64_t scalar_saturations = 0;
    for (std::size_t k = 0; k < shots.size(); ++k) {
        const FixedForward ff = forward_fixed_scalar(model, shots[k]);
        scalar_saturations += ff.saturation_count;
        int best = 0;
        for (std::size_t j = 1; j < ff.logits.size(); ++j) {
            if (ff.logits[j] > ff.logits[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(j);
            }
        }
        REQUIRE(run.labels[k] == StateLabel{best});
    }
    CHECK(run.saturation_count == scalar_saturations);
}

TEST_CASE("kernel latency is constant across shot batches") {
    const KernelSchedule sched = map_to_schedule(
        random_quantized(9), TileArrayConfig{}, vck190_ref_profile());
    const std::vector<std::vector<std::int16_t>> one(1, {100, -100});
    std::vector<std::vector<std::int16_t>> many(5000, {30000, 30000});
    CHECK(simulate_kernel(sched, one).kernel_ns_per_shot ==
          simulate_kernel(sched, many).kernel_ns_per_shot);

    const QuantizedMlp zero = shaped_quantized({2, 8, 8, 2});
    const KernelSchedule zsched =
        map_to_schedule(zero, TileArrayConfig{}, vck190_ref_profile());
    const KernelRun zrun = simulate_kernel(zsched, many);
    for (const StateLabel& l : zrun.labels) CHECK(l == StateLabel{0});

    std::vector<std::vector<std::int16_t>> bad(1, {1, 2, 3});
    CHECK_THROWS_AS(simulate_kernel(sched, bad), InputError);
}

TEST_CASE("utilization matches the published percentages") {
    const TileArrayConfig array;
    CHECK(array.total_tiles() == 400);
    CHECK(array.stream_switch_total() == 450);
    const KernelSchedule sched = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), array, vck190_ref_profile());
    const UtilizationReport util = compute_utilization(sched, array);
    CHECK(util.kernel_tile_pct == 0.25);
    CHECK(util.buffer_tile_pct == 0.5);
    CHECK(util.stream_tile_pct == doctest::Approx(100.0 * 2 / 450).epsilon(1e-15));
    CHECK(util.kernel_tiles_used == 1);
    CHECK(util.buffer_tiles_used == 2);
    CHECK(util.stream_switches_used == 2);
    CHECK(util.kernel_tiles_total == 400);
    CHECK(util.buffer_tiles_total == 400);
    CHECK(util.stream_switches_total == 450);

    REQUIRE(util.placement.size() == 5);
    CHECK(util.placement[0].row == 0);
    CHECK(util.placement[0].col == 0);
    CHECK(util.placement[0].role == "kernel");
    CHECK(util.placement[1].row == 1);
    CHECK(util.placement[1].role == "buffer");
    CHECK(util.placement[2].row == 2);
    CHECK(util.placement[2].role == "buffer");
    CHECK(util.placement[3].row == 0);
    CHECK(util.placement[3].role == "stream");
    CHECK(util.placement[4].row == -1);  // column shim switch
    CHECK(util.placement[4].col == 0);
    CHECK(util.placement[4].role == "stream");
}

TEST_CASE("replication scales tiles but not cycles") {
    const TileArrayConfig array;
    const KernelSchedule base = map_to_schedule(
        shaped_quantized({2, 8, 8, 2}), array, vck190_ref_profile());

    const KernelSchedule two = replicate_schedule(base, 2, array);
    CHECK(two.replicas == 2);
    CHECK(two.total_cycles == base.total_cycles);
    CHECK(two.tiles_used.kernel == 2);
    CHECK(two.tiles_used.buffer == 4);
    CHECK(two.tiles_used.stream == 3);  // two tile switches + one shim
    CHECK(two.traffic_bytes() == 2944);

    // Nine replicas spill into a second column: 9 + ceil(9/8) = 11 switches.
    const KernelSchedule nine = replicate_schedule(base, 9, array);
    CHECK(nine.tiles_used.stream == 11);
    const UtilizationReport util = compute_utilization(nine, array);
    CHECK(util.stream_switches_used == 11);
    CHECK(util.kernel_tile_pct == doctest::Approx(2.25).epsilon(1e-15));
    int shim_switches = 0;
    for (const TilePlacement& p : util.placement) {
        if (p.row == -1) {
            CHECK(p.role == "stream");
            ++shim_switches;
        }
    }
    CHECK(shim_switches == 2);

    const KernelSchedule six = replicate_schedule(two, 3, array);
    CHECK(six.replicas == 6);

    CHECK_THROWS_AS(replicate_schedule(base, 0, array), ConfigError);
    CHECK_THROWS_WITH_AS(replicate_schedule(base, 134, array),
                         doctest::Contains("array has 400"), PlacementError);
}

TEST_CASE("power matches the calibrated reference point") {
    const TileArrayConfig array;
    const CalibrationProfile& calib = vck190_ref_profile();
    const KernelSchedule sched =
        map_to_schedule(shaped_quantized({2, 8, 8, 2}), array, calib);
    const UtilizationReport util = compute_utilization(sched, array);
    const PowerEstimate power = estimate_power(util, sched, calib);
    CHECK(power.core_w == 0.092);
    CHECK(power.memory_w == 0.501);
    CHECK(power.total_w == 0.593);
    CHECK(power.model == "linear-calibrated");

    // Two replicas double both terms linearly.
    const KernelSchedule two = replicate_schedule(sched, 2, array);
    const UtilizationReport util2 = compute_utilization(two, array);
    const PowerEstimate power2 = estimate_power(util2, two, calib);
    CHECK(power2.core_w == 2.0 * power.core_w);
    CHECK(power2.memory_w == 2.0 * power.memory_w);
    CHECK(power2.total_w == power2.core_w + power2.memory_w);

    const PowerEstimate none = estimate_power(util, sched, zero_profile());
    CHECK(none.core_w == 0.0);
    CHECK(none.memory_w == 0.0);
    CHECK(none.total_w == 0.0);

    CalibrationProfile broken = calib;
    broken.reference_traffic_bytes = 0;
    CHECK_THROWS_AS(estimate_power(util, sched, broken), ConfigError);
}

TEST_CASE("array configuration validation") {
    TileArrayConfig bad_rows;
    bad_rows.rows = 0;
    CHECK_THROWS_AS(bad_rows.validate(), ConfigError);
    TileArrayConfig bad_lanes;
    bad_lanes.vector_lanes = 0;
    CHECK_THROWS_AS(bad_lanes.validate(), ConfigError);
    TileArrayConfig bad_clock;
    bad_clock.clock_hz = 0.0;
    CHECK_THROWS_AS(bad_clock.validate(), ConfigError);
    TileArrayConfig bad_mem;
    bad_mem.local_mem_bytes = 0;
    CHECK_THROWS_AS(bad_mem.validate(), ConfigError);
    TileArrayConfig bad_gmio;
    bad_gmio.gmio_in = 0;
    CHECK_THROWS_AS(bad_gmio.validate(), ConfigError);
}

}  // TEST_SUITE
