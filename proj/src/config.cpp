#include "samlab/config.hpp"

#include "samlab/diagnostics.hpp"
#include "samlab/error.hpp"
#include "samlab/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>

namespace samlab {

std::string to_string(TaskSource t) {
    switch (t) {
    case TaskSource::synthetic_moons: return "synthetic-moons";
    case TaskSource::synthetic_motif_graphs: return "synthetic-motif-graphs";
    case TaskSource::graph_csv: return "graph-csv";
    }
    return "unknown";
}

TaskSource parse_task_source(const std::string& text) {
    for (auto t : {TaskSource::synthetic_moons, TaskSource::synthetic_motif_graphs, TaskSource::graph_csv})
        if (to_string(t) == text) return t;
    throw ConfigError("task: unknown task '" + text +
                      "' (synthetic-moons, synthetic-motif-graphs, graph-csv)");
}

void RunConfig::validate() const {
    model.validate();
    optimizer.validate();
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    for (double r : {train_ratio, val_ratio, test_ratio})
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw ConfigError("split.train + split.val + split.test must sum to 1 (within 1e-9)");
    if (task != TaskSource::graph_csv && num_samples < 1) throw ConfigError("data.samples must be >= 1");
    if (task == TaskSource::graph_csv && data_path.empty())
        throw ConfigError("data.path is required for task graph-csv");
    if (diagnostics.landscape_points % 2 == 0)
        throw ConfigError("diagnostics.landscape_points must be odd so the grid contains 0");
    if (!(diagnostics.landscape_span > 0.0)) throw ConfigError("diagnostics.landscape_span must be > 0");
    if (diagnostics.sharpness_directions < 1)
        throw ConfigError("diagnostics.sharpness_directions must be >= 1");
    if (!(diagnostics.sharpness_rho >= 0.0)) throw ConfigError("diagnostics.sharpness_rho must be >= 0");
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
    throw ConfigError(key + ": invalid value '" + value + "' (" + why + ")");
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
        bad_value(key, v, "expected a finite number");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
        bad_value(key, v, "expected a non-negative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "expected true or false");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::vector<std::size_t> to_uint_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (v.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(to_uint(key, v.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string from_uint_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define SAMLAB_REAL(KEY, MEMBER)                                                                  \
    Field {                                                                                       \
        KEY, [](const RunConfig& c) { return format_real(c.MEMBER); },                            \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_real(k, v); } \
    }
#define SAMLAB_UINT(KEY, MEMBER)                                                                  \
    Field {                                                                                       \
        KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                         \
            [](RunConfig& c, const std::string& k, const std::string& v) {                        \
                c.MEMBER = static_cast<decltype(c.MEMBER)>(to_uint(k, v));                        \
            }                                                                                     \
    }
#define SAMLAB_BOOL(KEY, MEMBER)                                                                  \
    Field {                                                                                       \
        KEY, [](const RunConfig& c) { return from_bool(c.MEMBER); },                              \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_bool(k, v); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"task", [](const RunConfig& c) { return to_string(c.task); },
              [](RunConfig& c, const std::string&, const std::string& v) { c.task = parse_task_source(v); }},
        SAMLAB_UINT("data.samples", num_samples),
        Field{"data.path", [](const RunConfig& c) { return c.data_path; },
              [](RunConfig& c, const std::string&, const std::string& v) { c.data_path = v; }},
        SAMLAB_REAL("data.noise", moons_noise),
        Field{"model.kind", [](const RunConfig& c) { return to_string(c.model.kind); },
              [](RunConfig& c, const std::string&, const std::string& v) { c.model.kind = parse_model_kind(v); }},
        Field{"model.task", [](const RunConfig& c) { return to_string(c.model.task); },
              [](RunConfig& c, const std::string&, const std::string& v) { c.model.task = parse_task_kind(v); }},
        SAMLAB_UINT("model.hidden_dim", model.hidden_dim),
        SAMLAB_UINT("model.num_layers", model.num_layers),
        SAMLAB_BOOL("model.self_loops", model.self_loops),
        Field{"optimizer.variant", [](const RunConfig& c) { return to_string(c.optimizer.variant.variant); },
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.optimizer.variant.variant = parse_variant(v);
              }},
        Field{"optimizer.base", [](const RunConfig& c) { return to_string(c.optimizer.base); },
              [](RunConfig& c, const std::string&, const std::string& v) { c.optimizer.base = parse_base_kind(v); }},
        SAMLAB_REAL("optimizer.eta", optimizer.eta),
        SAMLAB_REAL("optimizer.rho", optimizer.perturb.rho_initial),
        SAMLAB_REAL("optimizer.gamma", optimizer.perturb.gamma),
        SAMLAB_UINT("optimizer.lambda", optimizer.perturb.lambda),
        SAMLAB_BOOL("optimizer.schedule", optimizer.perturb.schedule),
        SAMLAB_REAL("optimizer.beta", optimizer.perturb.beta),
        Field{"optimizer.reanchor_period",
              [](const RunConfig& c) {
                  const auto k = c.optimizer.perturb.reanchor_period;
                  return k == 0 ? std::string("never") : std::to_string(k);
              },
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.optimizer.perturb.reanchor_period = v == "never" ? 0 : to_uint(k, v);
                  if (v != "never" && c.optimizer.perturb.reanchor_period == 0)
                      bad_value(k, v, "use 'never' to disable re-anchoring");
              }},
        SAMLAB_BOOL("optimizer.reanchor_every_step", optimizer.perturb.reanchor_every_step),
        SAMLAB_UINT("optimizer.k", optimizer.variant.k),
        SAMLAB_REAL("optimizer.alpha_look", optimizer.variant.alpha_look),
        SAMLAB_REAL("optimizer.p_rst", optimizer.variant.p_rst),
        SAMLAB_REAL("optimizer.aesam_quantile", optimizer.variant.aesam_quantile),
        SAMLAB_UINT("train.epochs", epochs),
        SAMLAB_UINT("train.batch_size", batch_size),
        SAMLAB_REAL("split.train", train_ratio),
        SAMLAB_REAL("split.val", val_ratio),
        SAMLAB_REAL("split.test", test_ratio),
        SAMLAB_UINT("seed", seed),
        SAMLAB_BOOL("diagnostics.ground_truth", diagnostics.ground_truth),
        SAMLAB_BOOL("diagnostics.timing", diagnostics.timing),
        SAMLAB_BOOL("diagnostics.sharpness", diagnostics.sharpness),
        SAMLAB_REAL("diagnostics.sharpness_rho", diagnostics.sharpness_rho),
        SAMLAB_UINT("diagnostics.sharpness_directions", diagnostics.sharpness_directions),
        Field{"diagnostics.landscape_epochs",
              [](const RunConfig& c) { return from_uint_list(c.diagnostics.landscape_epochs); },
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.diagnostics.landscape_epochs = to_uint_list(k, v);
              }},
        SAMLAB_UINT("diagnostics.landscape_points", diagnostics.landscape_points),
        SAMLAB_REAL("diagnostics.landscape_span", diagnostics.landscape_span),
        Field{"output.dir", [](const RunConfig& c) { return c.output_dir; },
              [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
    };
    return table;
}

#undef SAMLAB_REAL
#undef SAMLAB_UINT
#undef SAMLAB_BOOL

std::string trim(std::string s) {
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

} // namespace

KeyValues to_key_values(const RunConfig& config) {
    KeyValues out;
    for (const auto& f : fields()) out[f.key] = f.get(config);
    return out;
}

RunConfig apply_key_values(RunConfig base, const KeyValues& values) {
    for (const auto& [key, value] : values) {
        const Field* field = nullptr;
        for (const auto& f : fields())
            if (key == f.key) field = &f;
        if (!field) throw ConfigError("unknown configuration key '" + key + "'");
        field->set(base, key, value);
    }
    base.validate();
    return base;
}

KeyValues parse_config_text(std::istream& in, const std::string& source) {
    KeyValues out;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

KeyValues load_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path.string() + ": cannot open config file");
    return parse_config_text(f, path.string());
}

KeyValues parse_overrides(const std::vector<std::string>& items) {
    KeyValues out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + item + "' must look like key=value");
        out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return out;
}

RunSeeds derive_run_seeds(std::uint64_t master) {
    return {derive_seed(master, SeedComponent::data),     derive_seed(master, SeedComponent::split),
            derive_seed(master, SeedComponent::init),     derive_seed(master, SeedComponent::optimizer),
            derive_seed(master, SeedComponent::shuffle),  derive_seed(master, SeedComponent::diagnostics)};
}

bool is_optimizer_key(const std::string& key) { return key.starts_with("optimizer."); }

} // namespace samlab
