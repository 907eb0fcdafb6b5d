#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedmr/data.hpp"
#include "fedmr/orchestrator.hpp"

// Experiment harness shared by the CLI and the tests: manifests, metrics
// files, run directories, comparison and the verification suites.

namespace fedmr {

inline constexpr const char* kMetricsSchema = "fedmr-metrics v1";

struct DatasetSpec {
    int classes = 2;
    int dim = 2;
    int per_class = 100;
    double spread = 1.0;
    uint64_t seed = 0;
};

struct NamedRun {
    std::string name;
    RunConfig cfg;
};

struct ExperimentManifest {
    std::string name = "experiment";
    uint64_t seed = 0;
    DatasetSpec dataset;
    PartitionSpec partition;
    std::vector<int> hidden;  // MLP hidden widths
    std::vector<NamedRun> runs;
    bool export_dataset = false;

    /// Parses and validates; errors name the offending field.
    static ExperimentManifest from_json_text(const std::string& text);
    static ExperimentManifest load(const std::filesystem::path& path);
    std::string to_json_text() const;
};

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<RoundRecord>& records);
std::vector<RoundRecord> read_metrics_csv(const std::filesystem::path& path);
void write_metrics_jsonl(const std::filesystem::path& path,
                         const std::vector<RoundRecord>& records);

/// Executes every run in the manifest. Creates per-run directories under
/// out_dir holding metrics.csv, metrics.jsonl, checkpoints, the partition
/// map and a fully resolved config snapshot for exact replay.
int cmd_run(const ExperimentManifest& manifest, const std::filesystem::path& out_dir,
            std::optional<uint64_t> seed_override, int threads);

struct CompareRow {
    std::string name;
    uint64_t dataset_fingerprint = 0;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
    int rounds_to_target = -1;  // -1 = never reached
};

struct CompareResult {
    double target = 0.0;
    std::vector<CompareRow> rows;
};

/// Reads run directories produced by cmd_run; refuses to mix runs whose
/// dataset fingerprints differ.
CompareResult cmd_compare(const std::vector<std::filesystem::path>& run_dirs,
                          double target_accuracy);
std::string compare_table(const CompareResult& result);

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::string suite;
    bool passed = false;
    std::vector<VerifyCheck> checks;

    std::string to_json_text() const;
};

/// Fixed-seed property suites: lemma1 | gradcheck | secure | partition.
VerifyReport cmd_verify(const std::string& suite);

}  // namespace fedmr
