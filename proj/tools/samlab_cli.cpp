#include "samlab/config.hpp"
#include "samlab/dataset.hpp"
#include "samlab/diagnostics.hpp"
#include "samlab/error.hpp"
#include "samlab/report.hpp"
#include "samlab/training.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr const char* output_env = "SAMLAB_OUTPUT_DIR";
constexpr int exit_error = 1;
constexpr int exit_diverged = 3;

struct ConfigFlags {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string output_dir;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("-c,--config", flags.config_file, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", flags.overrides, "Override a key: -s optimizer.rho=0.01 (repeatable)");
    cmd->add_option("-o,--output", flags.output_dir, std::string("Output directory (overrides ") + output_env + ")");
}

// defaults < config file < environment < --set < --output
samlab::RunConfig resolve(const ConfigFlags& flags, samlab::KeyValues base = {}) {
    samlab::KeyValues kv = std::move(base);
    if (!flags.config_file.empty())
        for (auto& [k, v] : samlab::load_config_file(flags.config_file)) kv[k] = v;
    if (const char* env = std::getenv(output_env); env && *env) kv["output.dir"] = env;
    for (auto& [k, v] : samlab::parse_overrides(flags.overrides)) kv[k] = v;
    if (!flags.output_dir.empty()) kv["output.dir"] = flags.output_dir;
    return samlab::apply_key_values(samlab::RunConfig{}, kv);
}

double mean_of(const std::vector<samlab::StepRecord>& records, double samlab::StepRecord::*field) {
    double sum = 0.0;
    for (const auto& r : records) sum += r.*field;
    return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

void print_run(const samlab::RunManifest& m) {
    std::cout << "status: " << samlab::to_string(m.status) << '\n';
    if (!m.diagnosis.empty()) std::cout << "diagnosis: " << m.diagnosis << '\n';
    for (const auto& [k, v] : m.final_metrics) std::cout << k << ": " << samlab::format_real(v) << '\n';
    std::cout << "output: " << m.config.at("output.dir") << '\n';
}

int finish(const samlab::RunManifest& m) {
    print_run(m);
    return m.status == samlab::RunStatus::ok ? 0 : exit_diverged;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"samlab: sharpness-aware minimization laboratory"};
    app.set_version_flag("--version", samlab::library_version());
    app.require_subcommand(1);

    // train
    ConfigFlags train_flags;
    std::string manifest_path;
    auto* train = app.add_subcommand("train", "Train one configuration and write its run directory");
    add_config_flags(train, train_flags);
    train->add_option("--manifest", manifest_path, "Re-run the configuration recorded in a manifest.json")
        ->check(CLI::ExistingFile);

    // compare
    ConfigFlags compare_flags;
    std::string variants = "adam,sam,graphsam";
    std::vector<std::string> entry_files;
    std::string seed_list = "0,1,2,3,4";
    std::size_t jobs = 1;
    auto* compare = app.add_subcommand("compare", "Train several optimizers over several seeds and report");
    add_config_flags(compare, compare_flags);
    compare->add_option("--variants", variants, "Comma-separated optimizer variants on top of the base config");
    compare->add_option("--entry", entry_files, "Extra config file applied on top of the base; label = file stem")
        ->check(CLI::ExistingFile);
    compare->add_option("--seeds", seed_list, "Comma-separated master seeds");
    compare->add_option("-j,--jobs", jobs, "Runs in flight at once (throughput is only comparable with 1)");

    // landscape
    ConfigFlags landscape_flags;
    std::string landscape_epochs;
    auto* landscape = app.add_subcommand("landscape", "Train and write 1-D loss-landscape slices");
    add_config_flags(landscape, landscape_flags);
    landscape->add_option("--epochs", landscape_epochs, "Comma-separated epochs to slice after (default: last)");

    // gradsim
    ConfigFlags gradsim_flags;
    auto* gradsim = app.add_subcommand("gradsim", "Train with ground-truth perturbation tracking and summarise");
    add_config_flags(gradsim, gradsim_flags);

    // dataset
    auto* dataset = app.add_subcommand("dataset", "Generate or validate graph CSV datasets");
    dataset->require_subcommand(1);
    std::string gen_kind = "motif";
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_task = "classification";
    double gen_noise = 0.15;
    std::string gen_out;
    auto* gen = dataset->add_subcommand("gen", "Write a synthetic dataset as graph CSV");
    gen->add_option("--kind", gen_kind, "motif or moons")->check(CLI::IsMember({"motif", "moons"}));
    gen->add_option("-n,--samples", gen_n, "Number of samples");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--task", gen_task, "classification or regression (motif only)");
    gen->add_option("--noise", gen_noise, "Moons noise");
    gen->add_option("-o,--output", gen_out, "Output file")->required();
    std::string validate_path;
    auto* check = dataset->add_subcommand("validate", "Parse a graph CSV file and report its shape");
    check->add_option("file", validate_path, "Graph CSV file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            samlab::KeyValues base;
            if (!manifest_path.empty()) base = samlab::load_manifest(manifest_path).config;
            return finish(samlab::run_training(resolve(train_flags, base)));
        }
        if (*compare) {
            const samlab::RunConfig base = resolve(compare_flags);
            std::vector<samlab::CompareEntry> entries;
            for (const auto& v : split_list(variants)) {
                samlab::RunConfig c = base;
                c.optimizer.variant.variant = samlab::parse_variant(v);
                entries.push_back({v, c});
            }
            for (const auto& file : entry_files) {
                samlab::KeyValues kv = samlab::to_key_values(base);
                for (auto& [k, v] : samlab::load_config_file(file)) kv[k] = v;
                entries.push_back({std::filesystem::path(file).stem().string(),
                                   samlab::apply_key_values(samlab::RunConfig{}, kv)});
            }
            samlab::CompareOptions options;
            options.seeds.clear();
            for (const auto& s : split_list(seed_list)) {
                try {
                    options.seeds.push_back(std::stoull(s));
                } catch (const std::exception&) {
                    throw samlab::ConfigError("--seeds: '" + s + "' is not a seed");
                }
            }
            options.output_dir = base.output_dir;
            options.jobs = jobs;
            const auto report = samlab::compare_optimizers(entries, options);
            std::cout << samlab::format_report_table(report);
            std::cout << "report: " << (options.output_dir / "report.csv").string() << '\n';
            return 0;
        }
        if (*landscape) {
            samlab::RunConfig config = resolve(landscape_flags);
            config.diagnostics.landscape_epochs.clear();
            for (const auto& e : split_list(landscape_epochs))
                config.diagnostics.landscape_epochs.push_back(std::stoull(e));
            if (config.diagnostics.landscape_epochs.empty())
                config.diagnostics.landscape_epochs.push_back(config.epochs - 1);
            const auto m = samlab::run_training(config);
            for (const auto& [name, file] : m.artifacts)
                if (name.starts_with("landscape")) std::cout << name << ": " << file << '\n';
            return finish(m);
        }
        if (*gradsim) {
            samlab::RunConfig config = resolve(gradsim_flags);
            config.diagnostics.ground_truth = true;
            const std::string started = samlab::utc_timestamp();
            const auto result = samlab::train(config);
            const auto m = samlab::persist_run(result, started, samlab::utc_timestamp());
            const auto& steps = result.steps;
            if (!steps.empty()) {
                std::printf("steps                          %zu\n", steps.size());
                std::printf("consistency vs ground truth    %.4f\n",
                            samlab::consistency_rate(steps, samlab::CosineField::eps_vs_ground_truth));
                std::printf("consistency eps/prev omega     %.4f\n",
                            samlab::consistency_rate(steps, samlab::CosineField::eps_omega));
                std::printf("mean ||eps||                   %.6g\n", mean_of(steps, &samlab::StepRecord::eps_norm));
                std::printf("mean ||omega||                 %.6g\n", mean_of(steps, &samlab::StepRecord::omega_norm));
                std::printf("mean eps change                %.6g\n", mean_of(steps, &samlab::StepRecord::eps_change));
                std::printf("mean omega change              %.6g\n", mean_of(steps, &samlab::StepRecord::omega_change));
            }
            return finish(m);
        }
        if (*gen) {
            std::vector<samlab::GraphSample> samples =
                gen_kind == "moons" ? samlab::generate_moons(gen_n, gen_seed, gen_noise)
                                    : samlab::generate_motif_graphs(gen_n, gen_seed, samlab::parse_task_kind(gen_task));
            samlab::write_graph_csv(gen_out, samples);
            std::cout << "wrote " << samples.size() << " samples to " << gen_out << '\n';
            return 0;
        }
        if (*check) {
            const auto samples = samlab::load_graph_csv(validate_path);
            std::size_t nodes = 0, edges = 0, positives = 0;
            for (const auto& g : samples) {
                nodes += g.num_nodes();
                edges += g.edges.size();
                if (g.label == 1.0) ++positives;
            }
            std::cout << validate_path << ": " << samples.size() << " samples, " << nodes << " nodes, " << edges
                      << " edges, d_node " << samples.front().node_dim() << ", d_edge " << samples.front().edge_dim
                      << ", label==1: " << positives << '\n';
            return 0;
        }
    } catch (const samlab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_error;
    }
    return 0;
}
