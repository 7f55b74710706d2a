#pragma once

#include "samlab/config.hpp"
#include "samlab/diagnostics.hpp"
#include "samlab/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace samlab {

struct CompareEntry {
    std::string label;
    RunConfig config;
};

// What the report needs from one finished run; obtainable from memory or
// from a run directory.
struct RunSummary {
    std::string label;
    std::string variant;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::ok;
    std::optional<double> metric;
    std::optional<double> sharpness;
    std::size_t train_samples = 0;
    std::vector<StepRecord> steps;
};

RunSummary summarize(const std::string& label, const RunResult& result);
// Reads manifest.json and steps.csv from `run_dir`.
RunSummary load_run_summary(const std::string& label, const std::filesystem::path& run_dir);

struct CompareRow {
    std::string label;
    std::string variant;
    std::size_t runs = 0;
    std::size_t diverged = 0;
    std::string metric;                    // roc_auc or rmse
    std::optional<double> metric_mean;
    std::optional<double> metric_std;      // sample standard deviation
    std::optional<double> samples_per_second;
    std::optional<double> percent_of_sam;
    std::optional<double> consistency_rate; // against ground-truth epsilon, when measured
    std::optional<double> sharpness_mean;

    bool operator==(const CompareRow&) const = default;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    bool operator==(const CompareReport&) const = default;
};

// One row per label, in first-appearance order. Throughput uses the pooled
// step times of all seeds; the SAM row (variant "sam") is the reference.
CompareReport build_report(std::span<const RunSummary> runs, const std::string& metric);

// Throws ConfigError when two entries differ in anything but optimizer keys,
// diagnostics keys, seed or output directory.
void check_comparable(std::span<const CompareEntry> entries);

struct CompareOptions {
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::filesystem::path output_dir = "runs/compare";
    std::size_t jobs = 1;                  // runs in flight at once
};

// Trains every entry for every seed into <output_dir>/<label>/seed<s>, then
// writes report.csv next to them.
CompareReport compare_optimizers(std::span<const CompareEntry> entries, const CompareOptions& options);

// Rebuilds the report from the run directories written by compare_optimizers.
CompareReport load_compare_report(const std::filesystem::path& output_dir);

const std::vector<std::string>& compare_columns();
void write_report_csv(std::ostream& out, const CompareReport& report);
CompareReport read_report_csv(std::istream& in, const std::string& source = "<csv>");
std::string format_report_table(const CompareReport& report);

} // namespace samlab
