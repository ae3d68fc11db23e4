// File formats and atomic output. Every writer goes through AtomicFile:
// content lands in "<path>.partial" and is renamed into place only on
// commit, so readers never observe a torn file and a crashed run leaves
// only *.partial debris behind.
//
// Formats:
//   * integrated datasets: CSV, header "i,q,label", doubles as %.17g
//   * trace datasets:      binary, magic "QSDTRACE", little-endian
//   * float MLP:           JSON ("qsd-mlp" format tag)
//   * quantized MLP:       binary, magic "QSDQMLP1", little-endian
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "qsd/aie_model.hpp"
#include "qsd/discriminators.hpp"
#include "qsd/fixed_point.hpp"
#include "qsd/mlp.hpp"
#include "qsd/pipeline.hpp"
#include "qsd/signal_model.hpp"

namespace qsd::io {

class AtomicFile {
  public:
    explicit AtomicFile(const std::filesystem::path& path);
    ~AtomicFile();
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    std::ostream& stream() { return out_; }
    void commit();  // flush + rename into place; throws InputError on failure

  private:
    std::filesystem::path final_path_;
    std::filesystem::path partial_path_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_text_atomic(const std::filesystem::path& path,
                       std::string_view text);
void write_json_atomic(const std::filesystem::path& path,
                       const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Dataset containers. save_dataset picks the format from dataset.mode;
// load_dataset sniffs the trace magic and falls back to CSV.
void save_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset_csv(const std::filesystem::path& path);
void save_dataset_trace(const std::filesystem::path& path,
                        const Dataset& data);
Dataset load_dataset_trace(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

void save_mlp_json(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_mlp_json(const std::filesystem::path& path);
void save_quantized_mlp(const std::filesystem::path& path,
                        const QuantizedMlp& model);
QuantizedMlp load_quantized_mlp(const std::filesystem::path& path);

nlohmann::json confusion_to_json(const ConfusionMatrix& m);
std::string confusion_to_csv(const ConfusionMatrix& m);
nlohmann::json latency_to_json(const aie::LatencyReport& r);
nlohmann::json utilization_to_json(const aie::UtilizationReport& r);
nlohmann::json power_to_json(const aie::PowerEstimate& p);
nlohmann::json schedule_to_json(const aie::KernelSchedule& s);
std::string placement_to_csv(const aie::UtilizationReport& r);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace qsd::io
