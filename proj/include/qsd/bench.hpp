// Command layer shared by the qsd CLI and the in-process CLI tests.
//
// Commands communicate through files in the output directory, so each stage
// can run in a separate process and `bench` is literally the chain
// gen -> train -> quantize -> eval -> sim -> report over those artifacts:
//
//   gen       train.csv|train.qsdt, test.*, gen.json
//   train     mlp.json, train.json (loss curve)
//   quantize  mlp_q.bin, quantize.json
//   eval      eval.json, confusion_<model>.csv
//   sim       sim.json, placement.csv
//   report    report.json
//   bench     all of the above + bench.json, summary on stdout
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsd/config.hpp"

namespace qsd::bench {

struct CommandContext {
    ExperimentConfig config;
    std::filesystem::path out_dir;
};

std::filesystem::path dataset_path(const std::filesystem::path& dir,
                                   const std::string& split, ShotMode mode);

void cmd_gen(const CommandContext& ctx);
void cmd_train(const CommandContext& ctx);
void cmd_quantize(const CommandContext& ctx);
nlohmann::json cmd_eval(const CommandContext& ctx);
nlohmann::json cmd_sim(const CommandContext& ctx);
nlohmann::json cmd_report(const CommandContext& ctx);
nlohmann::json cmd_bench(const CommandContext& ctx, std::ostream& out);

// Full CLI entry point: args excludes the program name. Returns the process
// exit code: 0 success, 2 configuration/usage errors, 3 runtime failures.
// Error output is a single machine-parsable "error: ..." line on stderr.
int run_main(const std::vector<std::string>& args);

}  // namespace qsd::bench
