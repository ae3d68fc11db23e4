#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qsd/bench.hpp"
#include "qsd/io.hpp"

using namespace qsd;
namespace fs = std::filesystem;

namespace {

// Temporarily reroutes a standard stream into a buffer.
class Redirect {
  public:
    explicit Redirect(std::ostream& os)
        : os_(os), old_(os.rdbuf(buf_.rdbuf())) {}
    ~Redirect() { os_.rdbuf(old_); }
    std::string text() const { return buf_.str(); }

  private:
    std::ostream& os_;
    std::ostringstream buf_;
    std::streambuf* old_;
};

int run(const std::vector<std::string>& args) {
    return bench::run_main(args);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

fs::path write_config(const fs::path& dir, const nlohmann::json& doc) {
    const fs::path path = dir / "config.json";
    io::write_json_atomic(path, doc);
    return path;
}

nlohmann::json tiny_config() {
    return {{"dataset",
             {{"train_shots_per_state", 200}, {"test_shots_per_state", 100}}},
            {"nn", {{"epochs", 3}}}};
}

nlohmann::json quick_config() {
    return {{"dataset",
             {{"train_shots_per_state", 2000},
              {"test_shots_per_state", 1000}}},
            {"nn", {{"epochs", 10}}}};
}

bool has_partial_debris(const fs::path& dir) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.path().string().ends_with(".partial")) return true;
    }
    return false;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen writes byte-identical datasets on reruns") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), tiny_config()).string();
    const fs::path a = dir.path() / "a";
    const fs::path b = dir.path() / "b";

    CHECK(run({"gen", "--config", cfg, "--out", a.string()}) == 0);
    CHECK(run({"gen", "--config", cfg, "--out", b.string()}) == 0);

    CHECK(slurp(a / "train.csv") == slurp(b / "train.csv"));
    CHECK(slurp(a / "test.csv") == slurp(b / "test.csv"));
    const nlohmann::json ga = io::read_json_file(a / "gen.json");
    const nlohmann::json gb = io::read_json_file(b / "gen.json");
    CHECK(ga["train_fingerprint"] == gb["train_fingerprint"]);
    CHECK(ga["provenance"]["config_hash"] == gb["provenance"]["config_hash"]);
    CHECK_FALSE(has_partial_debris(dir.path()));
}

TEST_CASE("the stage chain runs in order and leaves the documented artifacts") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), quick_config()).string();
    const std::string out = (dir.path() / "out").string();
    const std::vector<std::string> common = {"--config", cfg, "--out", out};

    for (const char* stage :
         {"gen", "train", "quantize", "eval", "sim", "report"}) {
        std::vector<std::string> args = {stage};
        args.insert(args.end(), common.begin(), common.end());
        CAPTURE(stage);
        CHECK(run(args) == 0);
    }

    for (const char* name :
         {"train.csv", "test.csv", "gen.json", "mlp.json", "train.json",
          "mlp_q.bin", "quantize.json", "eval.json", "confusion_lda.csv",
          "confusion_qda.csv", "confusion_nn_float.csv",
          "confusion_nn_quant.csv", "sim.json", "placement.csv",
          "report.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(fs::path(out) / name));
    }
    CHECK_FALSE(has_partial_debris(dir.path()));

    const nlohmann::json eval = io::read_json_file(fs::path(out) / "eval.json");
    CHECK(eval["nn_quant"]["fidelity"].get<double>() >= 0.97);
    CHECK(eval["bayes"]["method"] == "analytic");

    const nlohmann::json report =
        io::read_json_file(fs::path(out) / "report.json");
    for (const char* key : {"config", "gen", "train", "quantize", "eval",
                            "sim", "provenance"}) {
        CHECK(report.contains(key));
    }
    CHECK(slurp(fs::path(out) / "placement.csv").starts_with("row,col,role\n"));
}

TEST_CASE("bench artifacts agree with each other") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), quick_config()).string();
    const std::string out = (dir.path() / "out").string();

    std::string summary_text;
    {
        Redirect stdout_capture(std::cout);
        CHECK(run({"bench", "--config", cfg, "--out", out}) == 0);
        summary_text = stdout_capture.text();
    }
    CHECK(summary_text.find("fidelity") != std::string::npos);
    CHECK(summary_text.find("102 cycles") != std::string::npos);

    const nlohmann::json eval = io::read_json_file(fs::path(out) / "eval.json");
    const nlohmann::json sim = io::read_json_file(fs::path(out) / "sim.json");
    const nlohmann::json bench_doc =
        io::read_json_file(fs::path(out) / "bench.json");

    CHECK(bench_doc["fidelity"]["nn_quant"] == eval["nn_quant"]["fidelity"]);
    CHECK(bench_doc["fidelity"]["lda"] == eval["lda"]["fidelity"]);
    // The vectorized kernel and the scalar evaluation path must agree shot
    // for shot, so the two fidelity numbers are the same double.
    CHECK(sim["fixed_fidelity"] == eval["nn_quant"]["fidelity"]);
    CHECK(bench_doc["kernel_cycles"] == 102);
    CHECK(sim["schedule"]["total_cycles"] == 102);
    CHECK(sim["utilization"]["kernel_tile_pct"] == 0.25);
    CHECK(sim["utilization"]["buffer_tile_pct"] == 0.5);
    CHECK(sim["power"]["total_w"] == 0.593);
    CHECK(bench_doc["provenance"]["config_hash"] ==
          eval["provenance"]["config_hash"]);
}

TEST_CASE("seed overrides are reproducible and change the data") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), tiny_config()).string();
    const fs::path a = dir.path() / "a";
    const fs::path b = dir.path() / "b";
    const fs::path c = dir.path() / "c";

    CHECK(run({"gen", "--config", cfg, "--out", a.string(), "--seed", "7"}) ==
          0);
    CHECK(run({"gen", "--config", cfg, "--out", b.string(), "--seed", "7"}) ==
          0);
    CHECK(run({"gen", "--config", cfg, "--out", c.string()}) == 0);

    const nlohmann::json ga = io::read_json_file(a / "gen.json");
    const nlohmann::json gb = io::read_json_file(b / "gen.json");
    const nlohmann::json gc = io::read_json_file(c / "gen.json");
    CHECK(ga["provenance"]["seed"] == 7);
    CHECK(ga["train_fingerprint"] == gb["train_fingerprint"]);
    CHECK(ga["train_fingerprint"] != gc["train_fingerprint"]);
    CHECK(ga["provenance"]["config_hash"] != gc["provenance"]["config_hash"]);
}

TEST_CASE("profile overrides reach the schedule") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), tiny_config()).string();
    const std::string out = (dir.path() / "out").string();
    const std::vector<std::string> common = {"--config", cfg, "--out", out};
    for (const char* stage : {"gen", "train", "quantize"}) {
        std::vector<std::string> args = {stage};
        args.insert(args.end(), common.begin(), common.end());
        REQUIRE(run(args) == 0);
    }

    CHECK(run({"sim", "--config", cfg, "--out", out, "--profile", "zero"}) ==
          0);
    const nlohmann::json sim = io::read_json_file(fs::path(out) / "sim.json");
    CHECK(sim["schedule"]["profile"] == "zero");
    CHECK(sim["schedule"]["total_cycles"] == 0);
    CHECK(sim["latency"]["kernel_ns"] == 0.0);

    Redirect stderr_capture(std::cerr);
    CHECK(run({"sim", "--config", cfg, "--out", out, "--profile", "warp"}) ==
          2);
}

TEST_CASE("usage errors exit 2, runtime failures exit 3") {
    oracle::TempDir dir;
    const std::string cfg = write_config(dir.path(), tiny_config()).string();
    const std::string out = (dir.path() / "out").string();

    {
        Redirect err(std::cerr);
        CHECK(run({}) == 2);
        CHECK(err.text().starts_with("error: config: "));
    }
    {
        Redirect err(std::cerr);
        CHECK(run({"gen"}) == 2);  // --config is required
    }
    {
        Redirect err(std::cerr);
        CHECK(run({"frobnicate", "--config", cfg}) == 2);
    }
    {
        Redirect out_capture(std::cout);
        CHECK(run({"--version"}) == 0);
        CHECK(out_capture.text().find("0.1.0") != std::string::npos);
    }
    {
        const fs::path bad =
            write_config(dir.path() / "bad", {{"dimensionn", 3}});
        Redirect err(std::cerr);
        CHECK(run({"gen", "--config", bad.string(), "--out", out}) == 2);
        CHECK(err.text().starts_with("error: config: "));
        CHECK(err.text().find("unknown config key 'dimensionn'") !=
              std::string::npos);
    }
    {
        // valid config, but no datasets were generated yet
        Redirect err(std::cerr);
        CHECK(run({"eval", "--config", cfg, "--out",
                   (dir.path() / "empty").string()}) == 3);
        const std::string text = err.text();
        CHECK(text.starts_with("error: "));
        CHECK(text.find("missing dataset") != std::string::npos);
        CHECK(text.find("run 'qsd gen' first") != std::string::npos);
        CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    }
    {
        Redirect err(std::cerr);
        CHECK(run({"gen", "--config",
                   (dir.path() / "absent.json").string(), "--out", out}) == 3);
    }
    {
        std::ofstream broken(dir.path() / "broken.json");
        broken << "{oops";
        broken.close();
        Redirect err(std::cerr);
        CHECK(run({"gen", "--config", (dir.path() / "broken.json").string(),
                   "--out", out}) == 3);
        CHECK(err.text().find("invalid JSON") != std::string::npos);
    }
    {
        // train before gen names the missing stage
        Redirect err(std::cerr);
        CHECK(run({"train", "--config", cfg, "--out",
                   (dir.path() / "empty2").string()}) == 3);
        CHECK(err.text().find("run 'qsd gen' first") != std::string::npos);
    }
}

}  // TEST_SUITE
