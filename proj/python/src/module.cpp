#include "samlab/config.hpp"
#include "samlab/dataset.hpp"
#include "samlab/diagnostics.hpp"
#include "samlab/error.hpp"
#include "samlab/optim.hpp"
#include "samlab/report.hpp"
#include "samlab/training.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <vector>

namespace py = pybind11;
using namespace samlab;

namespace {

ParamVector flat(std::vector<double> v) { return ParamVector::flat(std::move(v)); }

std::vector<double> values(const ParamVector& p) { return {p.values().begin(), p.values().end()}; }

py::dict graph_to_dict(const GraphSample& g) {
    std::vector<std::vector<double>> x(g.num_nodes(), std::vector<double>(g.node_dim()));
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        for (std::size_t j = 0; j < g.node_dim(); ++j) x[i][j] = g.node_features.at(i, j);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : g.edges) edges.emplace_back(e.src, e.dst);
    py::dict d;
    d["node_features"] = x;
    d["edges"] = edges;
    d["edge_dim"] = g.edge_dim;
    d["edge_features"] = g.edge_features;
    d["label"] = g.label;
    return d;
}

py::dict manifest_to_dict(const RunManifest& m) {
    py::dict d;
    d["status"] = to_string(m.status);
    d["diagnosis"] = m.diagnosis;
    d["config"] = m.config;
    d["final_metrics"] = m.final_metrics;
    d["artifacts"] = m.artifacts;
    d["started"] = m.started;
    d["finished"] = m.finished;
    d["version"] = m.version;
    return d;
}

py::dict result_to_dict(const RunResult& r) {
    py::list epochs;
    for (const auto& e : r.epochs) {
        py::dict d;
        d["epoch"] = e.epoch;
        d["train_loss"] = e.train_loss;
        d["val_metric"] = e.val_metric;
        d["rho"] = e.rho;
        d["forwards"] = e.forwards;
        d["backwards"] = e.backwards;
        epochs.append(d);
    }
    py::dict d;
    d["status"] = to_string(r.status);
    d["diagnosis"] = r.diagnosis;
    d["epochs"] = epochs;
    d["steps"] = r.steps.size();
    d["test_metric"] = r.test_metric;
    d["test_accuracy"] = r.test_accuracy;
    d["test_loss"] = r.test_loss;
    d["sharpness"] = r.sharpness;
    d["consistency_rate"] = r.steps.empty() || !r.steps.front().cos_eps_vs_ground_truth
                                ? std::optional<double>()
                                : consistency_rate(r.steps, CosineField::eps_vs_ground_truth);
    d["config"] = to_key_values(r.config);
    return d;
}

RunConfig config_from(const KeyValues& kv) { return apply_key_values(RunConfig{}, kv); }

} // namespace

PYBIND11_MODULE(_samlab, m) {
    m.doc() = "Sharpness-aware minimization laboratory";
    m.attr("__version__") = library_version();

    // Translators run last-registered first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    m.def("default_config", [] { return to_key_values(RunConfig{}); },
          "Every configuration key with its default value.");
    m.def("validate_config", [](const KeyValues& kv) { return to_key_values(config_from(kv)); },
          py::arg("config"), "Applies overrides to the defaults and returns the full, checked config.");
    m.def("train", [](const KeyValues& kv) {
              const RunConfig c = config_from(kv);
              py::gil_scoped_release release;
              RunResult r = train(c);
              py::gil_scoped_acquire acquire;
              return result_to_dict(r);
          },
          py::arg("config"), "Trains in memory and returns per-epoch records and final metrics.");
    m.def("run_training", [](const KeyValues& kv) {
              const RunConfig c = config_from(kv);
              py::gil_scoped_release release;
              RunManifest man = run_training(c);
              py::gil_scoped_acquire acquire;
              return manifest_to_dict(man);
          },
          py::arg("config"), "Trains and writes the run directory; returns the manifest.");
    m.def("load_manifest", [](const std::filesystem::path& p) { return manifest_to_dict(load_manifest(p)); },
          py::arg("path"));

    m.def("rho_schedule", &rho_schedule, py::arg("rho_initial"), py::arg("gamma"), py::arg("lambda_"),
          py::arg("epoch"));
    m.def("project_perturbation",
          [](std::vector<double> e, double rho) { return values(project_perturbation(flat(std::move(e)), rho)); },
          py::arg("epsilon"), py::arg("rho"));
    m.def("moving_average_epsilon",
          [](std::vector<double> e, std::vector<double> w, double beta) {
              return values(moving_average_epsilon(flat(std::move(e)), flat(std::move(w)), beta));
          },
          py::arg("epsilon"), py::arg("omega"), py::arg("beta"));
    m.def("closed_form_epsilon",
          [](std::vector<double> e0, const std::vector<std::vector<double>>& omegas, double beta) {
              std::vector<GradVector> w;
              for (const auto& o : omegas) w.push_back(flat(o));
              return values(closed_form_epsilon(flat(std::move(e0)), w, beta));
          },
          py::arg("epsilon0"), py::arg("omegas"), py::arg("beta"));
    m.def("cosine_similarity",
          [](std::vector<double> a, std::vector<double> b) {
              return cosine_similarity(flat(std::move(a)), flat(std::move(b)));
          },
          py::arg("a"), py::arg("b"));

    m.def("generate_motif_graphs",
          [](std::size_t n, std::uint64_t seed, const std::string& task) {
              py::list out;
              for (const auto& g : generate_motif_graphs(n, seed, parse_task_kind(task))) out.append(graph_to_dict(g));
              return out;
          },
          py::arg("n"), py::arg("seed") = 0, py::arg("task") = "classification");
    m.def("load_graph_csv",
          [](const std::filesystem::path& p) {
              py::list out;
              for (const auto& g : load_graph_csv(p)) out.append(graph_to_dict(g));
              return out;
          },
          py::arg("path"));
    m.def("write_motif_csv",
          [](const std::filesystem::path& p, std::size_t n, std::uint64_t seed) {
              write_graph_csv(p, generate_motif_graphs(n, seed));
          },
          py::arg("path"), py::arg("n"), py::arg("seed") = 0);

    m.def("load_compare_report",
          [](const std::filesystem::path& dir) {
              py::list rows;
              for (const auto& r : load_compare_report(dir).rows) {
                  py::dict d;
                  d["label"] = r.label;
                  d["variant"] = r.variant;
                  d["runs"] = r.runs;
                  d["diverged"] = r.diverged;
                  d["metric"] = r.metric;
                  d["metric_mean"] = r.metric_mean;
                  d["metric_std"] = r.metric_std;
                  d["samples_per_second"] = r.samples_per_second;
                  d["percent_of_sam"] = r.percent_of_sam;
                  d["consistency_rate"] = r.consistency_rate;
                  d["sharpness_mean"] = r.sharpness_mean;
                  rows.append(d);
              }
              return rows;
          },
          py::arg("output_dir"));
}
