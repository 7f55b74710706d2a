#include "samlab/report.hpp"

#include "samlab/error.hpp"

#include "csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace samlab {

RunSummary summarize(const std::string& label, const RunResult& result) {
    RunSummary s;
    s.label = label;
    s.variant = to_string(result.config.optimizer.variant.variant);
    s.seed = result.config.seed;
    s.status = result.status;
    s.metric = result.test_metric;
    s.sharpness = result.sharpness;
    s.train_samples = result.train_samples;
    s.steps = result.steps;
    return s;
}

RunSummary load_run_summary(const std::string& label, const std::filesystem::path& run_dir) {
    const RunManifest m = load_manifest(run_dir / "manifest.json");
    const RunConfig config = config_from_manifest(m);
    RunSummary s;
    s.label = label;
    s.variant = to_string(config.optimizer.variant.variant);
    s.seed = config.seed;
    s.status = m.status;
    const auto find = [&](const std::string& key) -> std::optional<double> {
        auto it = m.final_metrics.find(key);
        if (it == m.final_metrics.end()) return std::nullopt;
        return it->second;
    };
    s.metric = find("test_" + metric_name(config.model.task));
    s.sharpness = find("sharpness");
    s.train_samples = static_cast<std::size_t>(find("train_samples").value_or(0.0));
    const auto steps_path = run_dir / m.artifacts.at("steps");
    std::ifstream f(steps_path);
    if (!f) throw ParseError(steps_path.string() + ": cannot open");
    s.steps = read_step_records_csv(f, steps_path.string());
    return s;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

std::optional<double> std_of(const std::vector<double>& v) {
    if (v.size() < 2) return v.empty() ? std::nullopt : std::optional<double>(0.0);
    const double m = *mean_of(v);
    double sum = 0.0;
    for (double x : v) sum += (x - m) * (x - m);
    return std::sqrt(sum / static_cast<double>(v.size() - 1));
}

} // namespace

CompareReport build_report(std::span<const RunSummary> runs, const std::string& metric) {
    CompareReport report;
    std::vector<std::string> labels;
    for (const auto& r : runs)
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);

    std::vector<RunThroughput> pooled;
    bool all_ok = true;
    for (const auto& label : labels) {
        CompareRow row;
        row.label = label;
        row.metric = metric;
        std::vector<double> metrics, sharpness;
        RunThroughput tp;
        tp.variant = label;
        std::vector<StepRecord> all_steps;
        for (const auto& r : runs) {
            if (r.label != label) continue;
            row.variant = r.variant;
            ++row.runs;
            if (r.status != RunStatus::ok) {
                ++row.diverged;
                all_ok = false;
                continue;
            }
            if (r.metric) metrics.push_back(*r.metric);
            if (r.sharpness) sharpness.push_back(*r.sharpness);
            tp.records.insert(tp.records.end(), r.steps.begin(), r.steps.end());
            tp.samples += r.train_samples;
        }
        row.metric_mean = mean_of(metrics);
        row.metric_std = std_of(metrics);
        row.sharpness_mean = mean_of(sharpness);
        bool measured = false;
        for (const auto& s : tp.records) measured = measured || s.cos_eps_vs_ground_truth.has_value();
        if (measured) row.consistency_rate = consistency_rate(tp.records, CosineField::eps_vs_ground_truth);
        pooled.push_back(std::move(tp));
        report.rows.push_back(std::move(row));
    }

    if (all_ok && !pooled.empty()) {
        auto sam = std::find_if(report.rows.begin(), report.rows.end(),
                                [](const CompareRow& r) { return r.variant == "sam"; });
        const std::string reference = sam != report.rows.end() ? sam->label : report.rows.front().label;
        try {
            const auto rows = throughput_report(pooled, reference);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                report.rows[i].samples_per_second = rows[i].samples_per_second;
                if (sam != report.rows.end()) report.rows[i].percent_of_sam = rows[i].percent_of_reference;
            }
        } catch (const UsageError&) {
            // no timing recorded or unequal step counts: throughput stays empty
        }
    }
    return report;
}

void check_comparable(std::span<const CompareEntry> entries) {
    const auto relevant = [](const RunConfig& c) {
        KeyValues kv = to_key_values(c);
        std::erase_if(kv, [](const auto& item) {
            const auto& key = item.first;
            return is_optimizer_key(key) || key.starts_with("diagnostics.") || key == "seed" ||
                   key == "output.dir";
        });
        return kv;
    };
    if (entries.empty()) throw ConfigError("compare: no configurations");
    const KeyValues first = relevant(entries.front().config);
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const KeyValues other = relevant(entries[i].config);
        for (const auto& [key, value] : first) {
            if (other.at(key) != value)
                throw ConfigError("compare: '" + entries[i].label + "' differs from '" + entries.front().label +
                                  "' in non-optimizer key " + key + " (" + other.at(key) + " vs " + value + ")");
        }
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& label = entries[i].label;
        if (label.empty() || !std::all_of(label.begin(), label.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
            }))
            throw ConfigError("compare: label '" + label + "' must be non-empty and use only [A-Za-z0-9._-]");
        for (std::size_t j = 0; j < i; ++j)
            if (entries[j].label == label) throw ConfigError("compare: duplicate label '" + label + "'");
    }
}

namespace {

std::filesystem::path run_dir(const std::filesystem::path& root, const std::string& label, std::uint64_t seed) {
    return root / label / ("seed" + std::to_string(seed));
}

void write_index(const std::filesystem::path& root, std::span<const CompareEntry> entries,
                 const std::vector<std::uint64_t>& seeds, const std::string& metric) {
    nlohmann::ordered_json j;
    j["metric"] = metric;
    std::vector<std::string> labels;
    for (const auto& e : entries) labels.push_back(e.label);
    j["labels"] = labels;
    j["seeds"] = seeds;
    std::ofstream f(root / "compare.json");
    if (!f) throw Error("cannot write " + (root / "compare.json").string());
    f << j.dump(2) << '\n';
}

} // namespace

CompareReport compare_optimizers(std::span<const CompareEntry> entries, const CompareOptions& options) {
    check_comparable(entries);
    if (options.seeds.empty()) throw ConfigError("compare: no seeds");
    if (options.jobs < 1) throw ConfigError("compare: jobs must be >= 1");
    for (const auto& e : entries) e.config.validate();

    struct Job {
        std::size_t entry;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (auto seed : options.seeds) jobs.push_back({i, seed});

    std::vector<RunSummary> summaries(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            try {
                const auto& entry = entries[jobs[k].entry];
                RunConfig config = entry.config;
                config.seed = jobs[k].seed;
                config.output_dir = run_dir(options.output_dir, entry.label, jobs[k].seed).string();
                const std::string started = utc_timestamp();
                const RunResult result = train(config);
                persist_run(result, started, utc_timestamp());
                summaries[k] = summarize(entry.label, result);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (options.jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t t = 0; t < std::min(options.jobs, jobs.size()); ++t) threads.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const std::string metric = metric_name(entries.front().config.model.task);
    std::filesystem::create_directories(options.output_dir);
    write_index(options.output_dir, entries, options.seeds, metric);
    CompareReport report = build_report(summaries, metric);
    std::ofstream f(options.output_dir / "report.csv");
    if (!f) throw Error("cannot write " + (options.output_dir / "report.csv").string());
    write_report_csv(f, report);
    return report;
}

CompareReport load_compare_report(const std::filesystem::path& output_dir) {
    const auto index_path = output_dir / "compare.json";
    std::ifstream f(index_path);
    if (!f) throw ParseError(index_path.string() + ": cannot open");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(index_path.string() + ": " + e.what());
    }
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    const auto seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    std::vector<RunSummary> summaries;
    for (const auto& label : labels)
        for (auto seed : seeds) summaries.push_back(load_run_summary(label, run_dir(output_dir, label, seed)));
    return build_report(summaries, j.at("metric").get<std::string>());
}

const std::vector<std::string>& compare_columns() {
    static const std::vector<std::string> cols = {
        "label", "variant", "runs", "diverged", "metric", "metric_mean", "metric_std",
        "samples_per_second", "percent_of_sam", "consistency_rate", "sharpness_mean"};
    return cols;
}

void write_report_csv(std::ostream& out, const CompareReport& report) {
    const auto& cols = compare_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : report.rows)
        out << r.label << ',' << r.variant << ',' << r.runs << ',' << r.diverged << ',' << r.metric << ','
            << csv::cell(r.metric_mean) << ',' << csv::cell(r.metric_std) << ','
            << csv::cell(r.samples_per_second) << ',' << csv::cell(r.percent_of_sam) << ','
            << csv::cell(r.consistency_rate) << ',' << csv::cell(r.sharpness_mean) << '\n';
}

CompareReport read_report_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) csv::fail(source, lineno, "missing header");
    if (csv::split(line) != compare_columns()) csv::fail(source, lineno, "unexpected report header");
    CompareReport report;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != compare_columns().size())
            csv::fail(source, lineno, "expected " + std::to_string(compare_columns().size()) + " columns");
        CompareRow r;
        r.label = f[0];
        r.variant = f[1];
        r.runs = csv::parse_int<std::size_t>(f[2], source, lineno);
        r.diverged = csv::parse_int<std::size_t>(f[3], source, lineno);
        r.metric = f[4];
        r.metric_mean = csv::parse_opt(f[5], source, lineno);
        r.metric_std = csv::parse_opt(f[6], source, lineno);
        r.samples_per_second = csv::parse_opt(f[7], source, lineno);
        r.percent_of_sam = csv::parse_opt(f[8], source, lineno);
        r.consistency_rate = csv::parse_opt(f[9], source, lineno);
        r.sharpness_mean = csv::parse_opt(f[10], source, lineno);
        report.rows.push_back(std::move(r));
    }
    return report;
}

std::string format_report_table(const CompareReport& report) {
    const auto opt = [](const std::optional<double>& v, const char* fmt) {
        if (!v) return std::string("-");
        char buf[48];
        std::snprintf(buf, sizeof buf, fmt, *v);
        return std::string(buf);
    };
    std::ostringstream out;
    char buf[256];
    const std::string metric = report.rows.empty() ? "metric" : report.rows.front().metric;
    std::snprintf(buf, sizeof buf, "%-14s %-9s %4s %-19s %12s %8s %11s %11s\n", "label", "variant", "runs",
                  (metric + " mean±std").c_str(), "samples/s", "vs SAM", "consistency", "sharpness");
    out << buf;
    for (const auto& r : report.rows) {
        const std::string ms = opt(r.metric_mean, "%.4f") + " ± " + opt(r.metric_std, "%.4f");
        std::string runs = std::to_string(r.runs);
        if (r.diverged) runs += "!";
        std::snprintf(buf, sizeof buf, "%-14s %-9s %4s %-19s %12s %8s %11s %11s\n", r.label.c_str(),
                      r.variant.c_str(), runs.c_str(), ms.c_str(), opt(r.samples_per_second, "%.1f").c_str(),
                      opt(r.percent_of_sam, "%.1f%%").c_str(), opt(r.consistency_rate, "%.4f").c_str(),
                      opt(r.sharpness_mean, "%.5f").c_str());
        out << buf;
    }
    return out.str();
}

} // namespace samlab
