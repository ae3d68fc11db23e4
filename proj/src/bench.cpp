#include "qsd/bench.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "qsd/discriminators.hpp"
#include "qsd/fixed_point.hpp"
#include "qsd/io.hpp"
#include "qsd/rng.hpp"

namespace qsd::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t unix_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

json provenance(const CommandContext& ctx) {
    return {{"seed", ctx.config.seed},
            {"config_hash", config_hash(ctx.config)},
            {"tool_version", kToolVersion},
            {"generated_at_unix_ms", unix_ms_now()}};
}

Dataset load_required_dataset(const CommandContext& ctx,
                              const std::string& split) {
    const fs::path path =
        dataset_path(ctx.out_dir, split, ctx.config.dataset.mode);
    if (!fs::exists(path)) {
        throw InputError("missing dataset '" + path.string() +
                         "'; run 'qsd gen' first");
    }
    return io::load_dataset(path);
}

MlpModel load_required_mlp(const CommandContext& ctx) {
    const fs::path path = ctx.out_dir / "mlp.json";
    if (!fs::exists(path)) {
        throw InputError("missing model '" + path.string() +
                         "'; run 'qsd train' first");
    }
    return io::load_mlp_json(path);
}

QuantizedMlp load_required_qmlp(const CommandContext& ctx) {
    const fs::path path = ctx.out_dir / "mlp_q.bin";
    if (!fs::exists(path)) {
        throw InputError("missing model '" + path.string() +
                         "'; run 'qsd quantize' first");
    }
    return io::load_quantized_mlp(path);
}

json read_stage_json(const CommandContext& ctx, const std::string& name,
                     const std::string& producer) {
    const fs::path path = ctx.out_dir / name;
    if (!fs::exists(path)) {
        throw InputError("missing report input '" + path.string() +
                         "'; run 'qsd " + producer + "' first");
    }
    return io::read_json_file(path);
}

bool wants(const CommandContext& ctx, const std::string& name) {
    for (const std::string& d : ctx.config.discriminators) {
        if (d == name) return true;
    }
    return false;
}

json bayes_to_json(const BayesBoundEstimate& bound) {
    return {{"error_probability", bound.error_probability},
            {"fidelity_bound", 1.0 - bound.error_probability},
            {"method",
             bound.method == BayesMethod::analytic ? "analytic" : "mc"},
            {"mc_shots", bound.mc_shots},
            {"confidence_halfwidth", bound.confidence_halfwidth}};
}

BayesBoundEstimate bayes_bound(const CommandContext& ctx) {
    const GaussianStateModel model = ctx.config.state_model();
    const std::string& method = ctx.config.bayes.method;
    const bool analytic_ok = model.dimension() == 2 &&
                             model.equal_covariances() &&
                             model.equal_priors();
    if (method == "analytic" || (method == "auto" && analytic_ok)) {
        return bayes_error_analytic(model);
    }
    return bayes_error_mc(model, ctx.config.bayes.mc_shots,
                          derive_seed(ctx.config.seed, StreamTag::bayes_mc, 0));
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v);
    return buf;
}

}  // namespace

fs::path dataset_path(const fs::path& dir, const std::string& split,
                      ShotMode mode) {
    return dir / (split + (mode == ShotMode::trace ? ".qsdt" : ".csv"));
}

void cmd_gen(const CommandContext& ctx) {
    const GaussianStateModel model = ctx.config.state_model();
    const GenerateOptions opt = ctx.config.generate_options();
    const Dataset train = generate_shots(
        model, ctx.config.dataset.train_shots_per_state,
        derive_seed(ctx.config.seed, StreamTag::dataset_train, 0), opt);
    const Dataset test = generate_shots(
        model, ctx.config.dataset.test_shots_per_state,
        derive_seed(ctx.config.seed, StreamTag::dataset_test, 0), opt);
    io::save_dataset(dataset_path(ctx.out_dir, "train", opt.mode), train);
    io::save_dataset(dataset_path(ctx.out_dir, "test", opt.mode), test);
    io::write_json_atomic(
        ctx.out_dir / "gen.json",
        {{"mode", to_string(opt.mode)},
         {"train_shots", train.size()},
         {"test_shots", test.size()},
         {"train_fingerprint", dataset_fingerprint(train)},
         {"test_fingerprint", dataset_fingerprint(test)},
         {"provenance", provenance(ctx)}});
    log_info("gen: wrote " + std::to_string(train.size()) + " train and " +
             std::to_string(test.size()) + " test shots");
}

void cmd_train(const CommandContext& ctx) {
    const Dataset train = load_required_dataset(ctx, "train");
    const MlpModel init = init_mlp(ctx.config.nn.dims, ctx.config.seed,
                                   ctx.config.nn.weight_init_scale);
    const TrainResult result =
        train_sgd(init, train, ctx.config.train_config());
    io::save_mlp_json(ctx.out_dir / "mlp.json", result.model);
    io::write_json_atomic(
        ctx.out_dir / "train.json",
        {{"epoch_loss", result.epoch_loss},
         {"initial_loss", result.epoch_loss.front()},
         {"final_loss", result.epoch_loss.back()},
         {"epochs", ctx.config.nn.epochs},
         {"train_fingerprint", dataset_fingerprint(train)},
         {"provenance", provenance(ctx)}});
    log_info("train: final loss " +
             std::to_string(result.epoch_loss.back()));
}

void cmd_quantize(const CommandContext& ctx) {
    const MlpModel model = load_required_mlp(ctx);
    const QuantizedMlp quantized =
        quantize_model(model, ctx.config.fractional_bits);
    io::save_quantized_mlp(ctx.out_dir / "mlp_q.bin", quantized);
    double max_abs = 0.0;
    for (const MlpLayer& layer : model.layers) {
        for (double w : layer.weights) max_abs = std::max(max_abs, std::abs(w));
        for (double b : layer.biases) max_abs = std::max(max_abs, std::abs(b));
    }
    io::write_json_atomic(
        ctx.out_dir / "quantize.json",
        {{"fractional_bits", quantized.fractional_bits},
         {"dims", quantized.dims},
         {"max_abs_param", max_abs},
         {"provenance", provenance(ctx)}});
}

json cmd_eval(const CommandContext& ctx) {
    const Dataset train = load_required_dataset(ctx, "train");
    const Dataset test = load_required_dataset(ctx, "test");

    json doc;
    doc["test_fingerprint"] = dataset_fingerprint(test);
    doc["bayes"] = bayes_to_json(bayes_bound(ctx));

    const auto add_model = [&](const std::string& name,
                               const ConfusionMatrix& cm) {
        doc[name] = {{"fidelity", cm.fidelity()},
                     {"confusion", io::confusion_to_json(cm)}};
        io::write_text_atomic(ctx.out_dir / ("confusion_" + name + ".csv"),
                              io::confusion_to_csv(cm));
    };

    if (wants(ctx, "lda")) {
        add_model("lda", evaluate(fit_lda(train), test));
    }
    if (wants(ctx, "qda")) {
        add_model("qda", evaluate(fit_qda(train), test));
    }
    if (wants(ctx, "nn")) {
        add_model("nn_float", evaluate(load_required_mlp(ctx), test));
        add_model("nn_quant", evaluate(load_required_qmlp(ctx), test));
    }
    doc["provenance"] = provenance(ctx);
    io::write_json_atomic(ctx.out_dir / "eval.json", doc);
    return doc;
}

json cmd_sim(const CommandContext& ctx) {
    const QuantizedMlp quantized = load_required_qmlp(ctx);
    const Dataset test = load_required_dataset(ctx, "test");
    const aie::CalibrationProfile& calib =
        aie::find_profile(ctx.config.profile);

    const aie::KernelSchedule schedule =
        aie::map_to_schedule(quantized, ctx.config.array, calib);
    const auto features = quantize_dataset_features(test, quantized);
    const aie::KernelRun run = aie::simulate_kernel(schedule, features);

    std::uint64_t correct = 0;
    for (std::size_t k = 0; k < run.labels.size(); ++k) {
        if (run.labels[k] == test.labels[k]) ++correct;
    }
    const double fixed_fidelity =
        static_cast<double>(correct) / static_cast<double>(test.size());

    const aie::UtilizationReport util =
        aie::compute_utilization(schedule, ctx.config.array);
    const aie::PowerEstimate power =
        aie::estimate_power(util, schedule, calib);
    const aie::LatencyReport latency =
        aie::simulate_pipeline(schedule, ctx.config.pipeline, test.size());

    json doc = {{"schedule", io::schedule_to_json(schedule)},
                {"latency", io::latency_to_json(latency)},
                {"utilization", io::utilization_to_json(util)},
                {"power", io::power_to_json(power)},
                {"shots", test.size()},
                {"fixed_fidelity", fixed_fidelity},
                {"saturation_count", run.saturation_count},
                {"provenance", provenance(ctx)}};
    io::write_json_atomic(ctx.out_dir / "sim.json", doc);
    io::write_text_atomic(ctx.out_dir / "placement.csv",
                          io::placement_to_csv(util));
    return doc;
}

json cmd_report(const CommandContext& ctx) {
    json doc;
    doc["config"] = config_to_json(ctx.config);
    doc["gen"] = read_stage_json(ctx, "gen.json", "gen");
    doc["train"] = read_stage_json(ctx, "train.json", "train");
    doc["quantize"] = read_stage_json(ctx, "quantize.json", "quantize");
    doc["eval"] = read_stage_json(ctx, "eval.json", "eval");
    doc["sim"] = read_stage_json(ctx, "sim.json", "sim");
    doc["provenance"] = provenance(ctx);
    io::write_json_atomic(ctx.out_dir / "report.json", doc);
    return doc;
}

json cmd_bench(const CommandContext& ctx, std::ostream& out) {
    cmd_gen(ctx);
    cmd_train(ctx);
    cmd_quantize(ctx);
    const json eval = cmd_eval(ctx);
    const json sim = cmd_sim(ctx);
    cmd_report(ctx);

    json summary;
    json& fid = summary["fidelity"];
    for (const char* name : {"lda", "qda", "nn_float", "nn_quant"}) {
        if (eval.contains(name)) fid[name] = eval[name]["fidelity"];
    }
    fid["bayes_bound"] = eval["bayes"]["fidelity_bound"];
    summary["kernel_cycles"] = sim["schedule"]["total_cycles"];
    summary["kernel_ns"] = sim["latency"]["kernel_ns"];
    summary["end_to_end_ns_per_shot"] = sim["latency"]["end_to_end_ns_per_shot"];
    summary["throughput_shots_per_s"] =
        sim["latency"]["steady_state_throughput_shots_per_s"];
    summary["utilization_pct"] = {
        {"kernel", sim["utilization"]["kernel_tile_pct"]},
        {"buffer", sim["utilization"]["buffer_tile_pct"]},
        {"stream", sim["utilization"]["stream_tile_pct"]}};
    summary["power_w"] = {{"core", sim["power"]["core_w"]},
                          {"memory", sim["power"]["memory_w"]},
                          {"total", sim["power"]["total_w"]}};
    summary["saturation_count"] = sim["saturation_count"];
    summary["provenance"] = provenance(ctx);
    io::write_json_atomic(ctx.out_dir / "bench.json", summary);

    char line[256];
    out << "fidelity ";
    for (const char* name : {"lda", "qda", "nn_float", "nn_quant"}) {
        if (fid.contains(name)) {
            std::snprintf(line, sizeof(line), " %s=%.4f", name,
                          fid[name].get<double>());
            out << line;
        }
    }
    std::snprintf(line, sizeof(line), " bayes<=%.4f",
                  fid["bayes_bound"].get<double>());
    out << line << '\n';
    std::snprintf(line, sizeof(line),
                  "kernel    %llu cycles  %.4g ns  (%s)\n",
                  static_cast<unsigned long long>(
                      summary["kernel_cycles"].get<std::uint64_t>()),
                  summary["kernel_ns"].get<double>(),
                  ctx.config.profile.c_str());
    out << line;
    std::snprintf(line, sizeof(line),
                  "pipeline  %.4g shots/s steady state  %.4g ns/shot "
                  "end-to-end\n",
                  summary["throughput_shots_per_s"].get<double>(),
                  summary["end_to_end_ns_per_shot"].get<double>());
    out << line;
    out << "tiles     kernel " << pct(sim["utilization"]["kernel_tile_pct"])
        << "  buffer " << pct(sim["utilization"]["buffer_tile_pct"])
        << "  stream " << pct(sim["utilization"]["stream_tile_pct"]) << '\n';
    std::snprintf(line, sizeof(line),
                  "power     %.3f W (core %.3f + memory %.3f)\n",
                  summary["power_w"]["total"].get<double>(),
                  summary["power_w"]["core"].get<double>(),
                  summary["power_w"]["memory"].get<double>());
    out << line;
    return summary;
}

int run_main(const std::vector<std::string>& args) {
    CLI::App app{"qsdkit: qubit state discrimination toolkit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string profile_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON")
            ->required();
        sub->add_option("--out", out_override,
                        "output directory (default: config out_dir)");
        sub->add_option("--seed", seed_override, "master seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--profile", profile_override,
                        "calibration profile override");
        return sub;
    };
    const char* names[7] = {"gen", "train", "quantize", "eval",
                            "sim", "report", "bench"};
    const char* blurbs[7] = {"generate datasets",
                             "train the float MLP",
                             "quantize the trained MLP",
                             "evaluate discriminators on the test set",
                             "map and simulate the accelerator kernel",
                             "merge stage reports",
                             "run the full chain and summarize"};
    for (int i = 0; i < 7; ++i) {
        add_common(app.add_subcommand(names[i], blurbs[i]));
    }

    try {
        // CLI11's vector overload consumes a reversed argv.
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << std::endl;
        return 2;
    }

    try {
        CommandContext ctx;
        ctx.config = load_config_file(config_path);
        if (seed_set) ctx.config.seed = seed_override;
        if (!profile_override.empty()) {
            aie::find_profile(profile_override);
            ctx.config.profile = profile_override;
        }
        if (!out_override.empty()) ctx.config.out_dir = out_override;
        ctx.out_dir = ctx.config.out_dir;

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "gen") {
            cmd_gen(ctx);
        } else if (cmd == "train") {
            cmd_train(ctx);
        } else if (cmd == "quantize") {
            cmd_quantize(ctx);
        } else if (cmd == "eval") {
            cmd_eval(ctx);
        } else if (cmd == "sim") {
            cmd_sim(ctx);
        } else if (cmd == "report") {
            cmd_report(ctx);
        } else {
            cmd_bench(ctx, std::cout);
        }
        return 0;
    } catch (const ConfigError& err) {
        std::cerr << "error: config: " << err.what() << std::endl;
        return 2;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << std::endl;
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: internal: " << err.what() << std::endl;
        return 3;
    }
}

}  // namespace qsd::bench
