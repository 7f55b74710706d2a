#include "samlab/training.hpp"

#include "samlab/error.hpp"
#include "samlab/model.hpp"
#include "samlab/objective.hpp"
#include "samlab/optim.hpp"
#include "samlab/rng.hpp"

#include "csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#ifndef SAMLAB_VERSION
#define SAMLAB_VERSION "0.0.0"
#endif

namespace samlab {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
    double pairs = 0.0;
    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] <= 0.5) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] > 0.5) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    if (pairs == 0.0) return std::nullopt;
    return wins / pairs;
}

double accuracy(std::span<const double> logits, std::span<const double> labels) {
    if (logits.size() != labels.size()) throw ShapeError("accuracy: logits and labels differ in length");
    if (logits.empty()) throw UsageError("accuracy: no samples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if ((logits[i] > 0.0) == (labels[i] > 0.5)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(logits.size());
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw ShapeError("rmse: inputs differ in length");
    if (predictions.empty()) throw UsageError("rmse: no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predictions.size()));
}

std::string metric_name(TaskKind task) { return task == TaskKind::classification ? "roc_auc" : "rmse"; }

bool higher_is_better(TaskKind task) { return task == TaskKind::classification; }

std::optional<double> headline_metric(TaskKind task, std::span<const double> outputs,
                                      std::span<const double> labels) {
    if (outputs.empty()) return std::nullopt;
    if (task == TaskKind::classification) return roc_auc(outputs, labels);
    return rmse(outputs, labels);
}

RunData prepare_data(const RunConfig& config) {
    const auto seeds = derive_run_seeds(config.seed);
    RunData data;
    switch (config.task) {
    case TaskSource::synthetic_moons:
        data.samples = generate_moons(config.num_samples, seeds.data, config.moons_noise);
        break;
    case TaskSource::synthetic_motif_graphs:
        data.samples = generate_motif_graphs(config.num_samples, seeds.data, config.model.task);
        break;
    case TaskSource::graph_csv:
        data.samples = load_graph_csv(config.data_path);
        break;
    }
    const auto& first = data.samples.front();
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& g = data.samples[i];
        if (g.node_dim() != first.node_dim() || g.edge_dim != first.edge_dim)
            throw ConfigError("sample " + std::to_string(i) + " has feature widths (" +
                              std::to_string(g.node_dim()) + ", " + std::to_string(g.edge_dim) +
                              "), expected (" + std::to_string(first.node_dim()) + ", " +
                              std::to_string(first.edge_dim) + ")");
        if (config.model.task == TaskKind::classification && g.label != 0.0 && g.label != 1.0)
            throw ConfigError("sample " + std::to_string(i) + " has label " + format_real(g.label) +
                              "; classification needs 0 or 1");
    }
    data.split = split_dataset(data.samples.size(), config.train_ratio, config.val_ratio,
                               config.test_ratio, seeds.split);
    return data;
}

RunConfig resolve_config(const RunConfig& config, const RunData& data) {
    RunConfig out = config;
    const auto seeds = derive_run_seeds(config.seed);
    out.model.node_dim = data.samples.front().node_dim();
    out.model.edge_dim = data.samples.front().edge_dim;
    out.model.init_seed = seeds.init;
    out.optimizer.variant.rng_seed = seeds.optimizer;
    out.validate();
    return out;
}

const std::vector<std::string>& epoch_record_columns() {
    static const std::vector<std::string> cols = {
        "epoch", "train_loss", "val_metric", "rho", "forwards", "backwards",
        "diagnostic_forwards", "diagnostic_backwards"};
    return cols;
}

void write_epoch_records_csv(std::ostream& out, std::span<const EpochRecord> records) {
    const auto& cols = epoch_record_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records)
        out << r.epoch << ',' << format_real(r.train_loss) << ',' << csv::cell(r.val_metric) << ','
            << format_real(r.rho) << ',' << r.forwards << ',' << r.backwards << ','
            << r.diagnostic_forwards << ',' << r.diagnostic_backwards << '\n';
}

std::vector<EpochRecord> read_epoch_records_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) csv::fail(source, lineno, "missing header");
    if (csv::split(line) != epoch_record_columns()) csv::fail(source, lineno, "unexpected metrics header");
    std::vector<EpochRecord> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != epoch_record_columns().size())
            csv::fail(source, lineno, "expected " + std::to_string(epoch_record_columns().size()) +
                                          " columns, got " + std::to_string(f.size()));
        EpochRecord r;
        r.epoch = csv::parse_int<std::size_t>(f[0], source, lineno);
        r.train_loss = csv::parse_double(f[1], source, lineno);
        r.val_metric = csv::parse_opt(f[2], source, lineno);
        r.rho = csv::parse_double(f[3], source, lineno);
        r.forwards = csv::parse_int<std::size_t>(f[4], source, lineno);
        r.backwards = csv::parse_int<std::size_t>(f[5], source, lineno);
        r.diagnostic_forwards = csv::parse_int<std::size_t>(f[6], source, lineno);
        r.diagnostic_backwards = csv::parse_int<std::size_t>(f[7], source, lineno);
        out.push_back(r);
    }
    return out;
}

std::string to_string(RunStatus s) { return s == RunStatus::ok ? "ok" : "diverged"; }

RunStatus parse_run_status(const std::string& text) {
    if (text == "ok") return RunStatus::ok;
    if (text == "diverged") return RunStatus::diverged;
    throw ParseError("unknown run status '" + text + "'");
}

namespace {

std::vector<double> labels_of(const Batch& batch) {
    std::vector<double> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = batch[i].label;
    return out;
}

std::vector<double> phi_grid(std::size_t points, double span) {
    std::vector<double> phis(points, 0.0);
    if (points == 1) return phis;
    const auto half = static_cast<double>(points / 2);
    for (std::size_t i = 0; i < points; ++i) phis[i] = span * (static_cast<double>(i) - half) / half;
    phis[points / 2] = 0.0;
    return phis;
}

} // namespace

RunResult train(const RunConfig& raw) {
    raw.validate();
    RunData data = prepare_data(raw);
    RunResult result;
    result.config = resolve_config(raw, data);
    const RunConfig& config = result.config;
    const auto seeds = derive_run_seeds(config.seed);
    const std::span<const GraphSample> samples(data.samples);

    ParamVector params = init_model(config.model);
    SamOptimizer optimizer(config.optimizer, params);
    Rng shuffle(seeds.shuffle);
    StepRecorder recorder;
    const Batch train_set = Batch::of(samples, data.split.train);
    const Batch val_set = Batch::of(samples, data.split.val);
    const Batch test_set = Batch::of(samples, data.split.test);
    const ModelObjective train_objective(config.model, train_set);
    std::vector<std::size_t> order = data.split.train;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord er;
        er.epoch = epoch;
        const auto diag_before = result.diagnostic_passes;
        try {
            optimizer.begin_epoch(epoch);
            shuffle.shuffle(order);
            double loss_sum = 0.0;
            std::size_t steps = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(order.size(), start + config.batch_size);
                const std::span<const std::size_t> idx(order.data() + start, stop - start);
                const ModelObjective objective(config.model, Batch::of(samples, idx));

                std::optional<GradVector> truth;
                if (config.diagnostics.ground_truth)
                    truth = ground_truth_epsilon(params, objective, result.diagnostic_passes);

                const auto t0 = std::chrono::steady_clock::now();
                StepOutcome outcome = optimizer.step(params, objective);
                const auto t1 = std::chrono::steady_clock::now();
                const std::int64_t ns =
                    config.diagnostics.timing
                        ? std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()
                        : 0;
                if (!std::isfinite(outcome.loss) || !params.all_finite())
                    throw NumericError("non-finite loss or parameters after the update");

                result.steps.push_back(
                    recorder.record(epoch, global_step, outcome, truth ? &*truth : nullptr, ns));
                result.train_samples += idx.size();
                loss_sum += outcome.loss;
                er.forwards += outcome.forwards;
                er.backwards += outcome.backwards;
                er.rho = outcome.rho;
                ++steps;
                ++global_step;
            }
            er.train_loss = loss_sum / static_cast<double>(steps);
            if (!val_set.empty()) {
                const auto outputs = model_predict(params, val_set, config.model);
                er.val_metric = headline_metric(config.model.task, outputs, labels_of(val_set));
            }
            if (!result.steps.empty()) result.steps.back().eval_metric = er.val_metric;

            const auto& want = config.diagnostics.landscape_epochs;
            if (std::find(want.begin(), want.end(), epoch) != want.end()) {
                CountingObjective counted(train_objective);
                const auto phis = phi_grid(config.diagnostics.landscape_points, config.diagnostics.landscape_span);
                result.landscapes.push_back(
                    {epoch, landscape_slice(params, counted, phis, seeds.diagnostics)});
                result.diagnostic_passes.forwards += counted.forwards();
            }
        } catch (const NumericError& e) {
            result.status = RunStatus::diverged;
            result.diagnosis = "diverged at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(global_step) + ": " + e.what();
            break;
        }
        er.diagnostic_forwards = result.diagnostic_passes.forwards - diag_before.forwards;
        er.diagnostic_backwards = result.diagnostic_passes.backwards - diag_before.backwards;
        result.epochs.push_back(er);
    }
    result.final_params = params;
    if (result.status != RunStatus::ok) return result;

    try {
        if (!test_set.empty()) {
            const auto outputs = model_predict(params, test_set, config.model);
            const auto labels = labels_of(test_set);
            result.test_metric = headline_metric(config.model.task, outputs, labels);
            if (config.model.task == TaskKind::classification) result.test_accuracy = accuracy(outputs, labels);
            result.test_loss = model_loss(params, test_set, config.model).loss;
        }
        if (config.diagnostics.sharpness) {
            CountingObjective counted(train_objective);
            result.sharpness = sharpness_estimate(params, counted, config.diagnostics.sharpness_rho,
                                                  config.diagnostics.sharpness_directions, seeds.diagnostics);
            result.diagnostic_passes.forwards += counted.forwards();
        }
    } catch (const NumericError& e) {
        result.status = RunStatus::diverged;
        result.diagnosis = std::string("diverged during final evaluation: ") + e.what();
    }
    return result;
}

std::string library_version() { return SAMLAB_VERSION; }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["version"] = m.version;
    j["status"] = to_string(m.status);
    j["diagnosis"] = m.diagnosis;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["config"] = m.config;
    j["final_metrics"] = m.final_metrics;
    j["artifacts"] = m.artifacts;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text, const std::string& source) {
    try {
        const auto j = nlohmann::json::parse(text);
        RunManifest m;
        m.version = j.at("version").get<std::string>();
        m.status = parse_run_status(j.at("status").get<std::string>());
        m.diagnosis = j.value("diagnosis", std::string{});
        m.started = j.value("started", std::string{});
        m.finished = j.value("finished", std::string{});
        m.config = j.at("config").get<KeyValues>();
        m.final_metrics = j.at("final_metrics").get<std::map<std::string, double>>();
        m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": " + e.what());
    }
}

RunManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError(path.string() + ": cannot open manifest");
    std::stringstream ss;
    ss << f.rdbuf();
    return manifest_from_json(ss.str(), path.string());
}

RunConfig config_from_manifest(const RunManifest& manifest) {
    return apply_key_values(RunConfig{}, manifest.config);
}

namespace {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    fn(f);
    if (!f) throw Error("failed writing '" + path.string() + "'");
}

} // namespace

RunManifest persist_run(const RunResult& result, const std::string& started, const std::string& finished) {
    const std::filesystem::path dir(result.config.output_dir);
    std::filesystem::create_directories(dir);

    RunManifest m;
    m.config = to_key_values(result.config);
    m.version = library_version();
    m.started = started;
    m.finished = finished;
    m.status = result.status;
    m.diagnosis = result.diagnosis;

    write_file(dir / "steps.csv", [&](std::ostream& o) { write_step_records_csv(o, result.steps); });
    m.artifacts["steps"] = "steps.csv";
    write_file(dir / "metrics.csv", [&](std::ostream& o) { write_epoch_records_csv(o, result.epochs); });
    m.artifacts["metrics"] = "metrics.csv";
    for (const auto& ls : result.landscapes) {
        const std::string name = "landscape_epoch" + std::to_string(ls.epoch) + ".csv";
        write_file(dir / name, [&](std::ostream& o) { write_landscape_csv(o, ls.slice); });
        m.artifacts["landscape_epoch" + std::to_string(ls.epoch)] = name;
    }

    const std::string metric = metric_name(result.config.model.task);
    if (result.test_metric) m.final_metrics["test_" + metric] = *result.test_metric;
    if (result.test_accuracy) m.final_metrics["test_accuracy"] = *result.test_accuracy;
    if (result.test_loss) m.final_metrics["test_loss"] = *result.test_loss;
    if (result.sharpness) m.final_metrics["sharpness"] = *result.sharpness;
    if (!result.epochs.empty()) {
        m.final_metrics["final_train_loss"] = result.epochs.back().train_loss;
        if (result.epochs.back().val_metric) m.final_metrics["final_val_" + metric] = *result.epochs.back().val_metric;
    }
    m.final_metrics["train_samples"] = static_cast<double>(result.train_samples);
    m.final_metrics["steps"] = static_cast<double>(result.steps.size());

    write_file(dir / "manifest.json", [&](std::ostream& o) { o << manifest_to_json(m); });
    return m;
}

RunManifest run_training(const RunConfig& config) {
    const std::string started = utc_timestamp();
    const RunResult result = train(config);
    return persist_run(result, started, utc_timestamp());
}

} // namespace samlab
