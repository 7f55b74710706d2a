#pragma once

#include "samlab/model.hpp"
#include "samlab/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace samlab {

enum class TaskSource { synthetic_moons, synthetic_motif_graphs, graph_csv };

std::string to_string(TaskSource t);
TaskSource parse_task_source(const std::string& text);

struct DiagnosticsConfig {
    bool ground_truth = false;      // fresh grad L(theta_t) per step, for cosine tracking
    bool timing = true;             // false writes wall_time_ns = 0 (fully byte-stable CSVs)
    bool sharpness = false;         // sharpness estimate on the training set after training
    double sharpness_rho = 0.05;
    std::size_t sharpness_directions = 64;
    std::vector<std::size_t> landscape_epochs; // slices after these epochs
    std::size_t landscape_points = 21;
    double landscape_span = 1.0;    // phi grid is [-span, span]
};

struct RunConfig {
    TaskSource task = TaskSource::synthetic_motif_graphs;
    std::size_t num_samples = 1000; // synthetic tasks
    std::string data_path;          // graph-csv
    double moons_noise = 0.15;

    ModelConfig model;
    OptimizerConfig optimizer;

    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double train_ratio = 0.8;
    double val_ratio = 0.1;
    double test_ratio = 0.1;
    std::uint64_t seed = 0;

    DiagnosticsConfig diagnostics;
    std::string output_dir = "runs/default";

    void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// Every configurable key with its current value, in canonical text form.
// model.init_seed and optimizer.rng_seed are not keys: both derive from `seed`.
KeyValues to_key_values(const RunConfig& config);

// Applies `values` on top of `base`. Unknown keys and malformed or
// out-of-range values throw ConfigError; nothing is clamped.
RunConfig apply_key_values(RunConfig base, const KeyValues& values);

// `key = value` lines; '#' starts a comment; `[section]` prefixes the keys
// below it with "section.".
KeyValues parse_config_text(std::istream& in, const std::string& source = "<config>");
KeyValues load_config_file(const std::filesystem::path& path);

// "key=value" override strings from the command line.
KeyValues parse_overrides(const std::vector<std::string>& items);

// Splits a master seed into the component seeds consumed by a run.
struct RunSeeds {
    std::uint64_t data;
    std::uint64_t split;
    std::uint64_t init;
    std::uint64_t optimizer;
    std::uint64_t shuffle;
    std::uint64_t diagnostics;
};
RunSeeds derive_run_seeds(std::uint64_t master);

// Configuration keys that only affect the optimizer (compare_optimizers may vary these).
bool is_optimizer_key(const std::string& key);

} // namespace samlab
