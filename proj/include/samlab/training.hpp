#pragma once

#include "samlab/config.hpp"
#include "samlab/dataset.hpp"
#include "samlab/diagnostics.hpp"
#include "samlab/graph.hpp"
#include "samlab/param_vector.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace samlab {

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

// Mann-Whitney pairwise ROC-AUC: fraction of (positive, negative) pairs ranked
// correctly, ties counting one half. Empty when a class is missing.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels);
// Logit > 0 predicts class 1.
double accuracy(std::span<const double> logits, std::span<const double> labels);
double rmse(std::span<const double> predictions, std::span<const double> targets);

// The headline metric of a task: ROC-AUC for classification (higher is
// better), RMSE for regression (lower is better).
std::string metric_name(TaskKind task);
bool higher_is_better(TaskKind task);
std::optional<double> headline_metric(TaskKind task, std::span<const double> outputs,
                                      std::span<const double> labels);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct RunData {
    std::vector<GraphSample> samples;
    DatasetSplit split;
};

// Generates or loads the configured dataset and splits it. Feature widths must
// be uniform across samples.
RunData prepare_data(const RunConfig& config);

// The config with node_dim / edge_dim taken from the data and the init and
// optimizer seeds derived from the master seed.
RunConfig resolve_config(const RunConfig& config, const RunData& data);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;           // mean of the step losses of the epoch
    std::optional<double> val_metric;
    double rho = 0.0;
    std::size_t forwards = 0;          // optimizer passes
    std::size_t backwards = 0;
    std::size_t diagnostic_forwards = 0;
    std::size_t diagnostic_backwards = 0;

    bool operator==(const EpochRecord&) const = default;
};

const std::vector<std::string>& epoch_record_columns();
void write_epoch_records_csv(std::ostream& out, std::span<const EpochRecord> records);
std::vector<EpochRecord> read_epoch_records_csv(std::istream& in, const std::string& source = "<csv>");

struct EpochSlice {
    std::size_t epoch = 0;
    LandscapeSlice slice;
};

enum class RunStatus { ok, diverged };
std::string to_string(RunStatus s);
RunStatus parse_run_status(const std::string& text);

struct RunResult {
    RunConfig config;                  // resolved
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    std::vector<EpochSlice> landscapes;
    ParamVector final_params;
    RunStatus status = RunStatus::ok;
    std::string diagnosis;             // why a run diverged
    std::size_t train_samples = 0;     // samples processed by optimizer steps
    std::optional<double> test_metric;
    std::optional<double> test_accuracy;
    std::optional<double> test_loss;
    std::optional<double> sharpness;
    DiagnosticCounter diagnostic_passes;
};

// Runs the configured optimizer for the configured epochs, in memory.
// Deterministic per config except for wall_time_ns (0 when timing is off).
RunResult train(const RunConfig& config);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

struct RunManifest {
    KeyValues config;                           // resolved, every key
    std::string version;
    std::string started;                        // ISO-8601 UTC
    std::string finished;
    RunStatus status = RunStatus::ok;
    std::string diagnosis;
    std::map<std::string, double> final_metrics;
    std::map<std::string, std::string> artifacts; // name -> file name relative to the run directory
};

std::string library_version();

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text, const std::string& source = "<manifest>");
RunManifest load_manifest(const std::filesystem::path& path);

// The config a manifest records, ready to run again.
RunConfig config_from_manifest(const RunManifest& manifest);

// Trains and writes steps.csv, metrics.csv, landscape_epoch<E>.csv and,
// last, manifest.json into config.output_dir.
RunManifest run_training(const RunConfig& config);
RunManifest persist_run(const RunResult& result, const std::string& started,
                        const std::string& finished);

std::string utc_timestamp();

} // namespace samlab
