#include "samlab/model.hpp"

#include "samlab/error.hpp"
#include "samlab/rng.hpp"

#include <cmath>

namespace samlab {

std::string to_string(ModelKind kind) {
    return kind == ModelKind::mlp ? "mlp" : "graph-attention";
}

std::string to_string(TaskKind kind) {
    return kind == TaskKind::classification ? "classification" : "regression";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "mlp") return ModelKind::mlp;
    if (text == "graph-attention") return ModelKind::graph_attention;
    throw ConfigError("model.kind: unsupported model kind '" + text + "' (mlp, graph-attention)");
}

TaskKind parse_task_kind(const std::string& text) {
    if (text == "classification") return TaskKind::classification;
    if (text == "regression") return TaskKind::regression;
    throw ConfigError("model.task: unsupported task '" + text + "' (classification, regression)");
}

void ModelConfig::validate() const {
    if (hidden_dim < 1) throw ConfigError("model.hidden_dim must be >= 1");
    if (num_layers < 1 || num_layers > 4) throw ConfigError("model.num_layers must be in [1, 4]");
    if (node_dim < 1) throw ConfigError("model.node_dim must be >= 1");
}

LayoutPtr model_layout(const ModelConfig& config) {
    config.validate();
    const std::size_t h = config.hidden_dim;
    Layout::Builder b;
    if (config.kind == ModelKind::mlp) {
        std::size_t in = config.node_dim;
        for (std::size_t l = 0; l < config.num_layers; ++l) {
            const std::string p = "mlp" + std::to_string(l);
            b.add(p + ".w", {in, h}).add(p + ".b", {1, h});
            in = h;
        }
    } else {
        b.add("embed.w", {config.node_dim, h}).add("embed.b", {1, h});
        for (std::size_t l = 0; l < config.num_layers; ++l) {
            const std::string p = "attn" + std::to_string(l);
            b.add(p + ".query", {h, h}).add(p + ".key", {h, h}).add(p + ".value", {h, h});
            if (config.edge_dim > 0) b.add(p + ".edge", {config.edge_dim, 1});
            b.add(p + ".out.w", {h, h}).add(p + ".out.b", {1, h});
        }
    }
    b.add("head.w", {h, 1}).add("head.b", {1, 1});
    return b.build();
}

ParamVector init_model(const ModelConfig& config) {
    ParamVector params(model_layout(config));
    Rng rng(config.init_seed);
    for (const auto& seg : params.layout()->segments()) {
        auto view = params.segment(seg.name);
        if (seg.name.ends_with(".b")) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(seg.shape[0]));
        for (auto& v : view) v = rng.uniform(-bound, bound);
    }
    return params;
}

AttentionParams attention_params(Tape& tape, const ParamVector& params, const std::string& prefix) {
    AttentionParams w;
    w.query = tape.parameter(params, prefix + ".query");
    w.key = tape.parameter(params, prefix + ".key");
    w.value = tape.parameter(params, prefix + ".value");
    if (params.layout()->contains(prefix + ".edge")) w.edge = tape.parameter(params, prefix + ".edge");
    return w;
}

AttentionResult attention_layer(Tape& tape, Var node_states, const GraphSample& graph,
                                const AttentionParams& weights, bool self_loops) {
    const std::size_t n = graph.num_nodes();
    if (tape.value(node_states).rows() != n)
        throw ShapeError("attention_layer: " + std::to_string(tape.value(node_states).rows()) +
                         " state rows for a graph of " + std::to_string(n) + " nodes");
    const std::size_t width = tape.value(weights.key).cols();

    Var q = tape.matmul(node_states, weights.query);
    Var k = tape.matmul(node_states, weights.key);
    Var v = tape.matmul(node_states, weights.value);
    Var scores = tape.scale(tape.matmul(q, tape.transpose(k)), 1.0 / std::sqrt(static_cast<double>(width)));

    // Row = receiving node, column = source node.
    Tensor mask(n, n);
    for (const auto& e : graph.edges) mask.at(e.dst, e.src) = 1.0;
    if (self_loops)
        for (std::size_t i = 0; i < n; ++i) mask.at(i, i) = 1.0;

    if (weights.edge && !graph.edges.empty()) {
        const std::size_t d_edge = tape.value(*weights.edge).rows();
        if (graph.edge_dim != d_edge)
            throw ShapeError("attention_layer: graph edge_dim " + std::to_string(graph.edge_dim) +
                             " but model expects " + std::to_string(d_edge));
        Var feats = tape.constant(Tensor::matrix(graph.edges.size(), d_edge, graph.edge_features));
        std::vector<std::size_t> positions;
        positions.reserve(graph.edges.size());
        for (const auto& e : graph.edges) positions.push_back(e.dst * n + e.src);
        Var bias = tape.scatter(tape.matmul(feats, *weights.edge), std::move(positions), {n, n});
        scores = tape.add(scores, bias);
    }

    Var attn = tape.softmax(scores, mask);
    Var out = tape.matmul(attn, v);

    Tensor passthrough(n, n);
    bool any_isolated = false;
    for (std::size_t i = 0; i < n; ++i) {
        bool has_source = false;
        for (std::size_t j = 0; j < n && !has_source; ++j) has_source = mask.at(i, j) != 0.0;
        if (!has_source) {
            passthrough.at(i, i) = 1.0;
            any_isolated = true;
        }
    }
    if (any_isolated) {
        if (tape.value(node_states).cols() != tape.value(out).cols())
            throw ShapeError("attention_layer: pass-through needs value width equal to state width");
        out = tape.add(out, tape.matmul(tape.constant(std::move(passthrough)), node_states));
    }
    return {out, attn};
}

namespace {

void check_batch(const Batch& batch, const ModelConfig& config) {
    if (batch.empty()) throw ShapeError("model_loss: empty batch");
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch[i].node_dim() != config.node_dim)
            throw ShapeError("model_loss: sample " + std::to_string(i) + " has node_dim " +
                             std::to_string(batch[i].node_dim()) + ", model expects " +
                             std::to_string(config.node_dim));
}

Var dense(Tape& tape, Var x, const ParamVector& params, const std::string& prefix) {
    return tape.add_row(tape.matmul(x, tape.parameter(params, prefix + ".w")),
                        tape.parameter(params, prefix + ".b"));
}

// B x 1 model outputs.
Var forward_outputs(Tape& tape, const ParamVector& params, const Batch& batch,
                    const ModelConfig& config) {
    check_batch(batch, config);
    Var pooled;
    if (config.kind == ModelKind::mlp) {
        // MLP sees the mean node feature vector of each sample.
        Tensor x(batch.size(), config.node_dim);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Tensor& f = batch[i].node_features;
            for (std::size_t r = 0; r < f.rows(); ++r)
                for (std::size_t c = 0; c < f.cols(); ++c) x.at(i, c) += f.at(r, c);
            for (std::size_t c = 0; c < f.cols(); ++c) x.at(i, c) /= static_cast<double>(f.rows());
        }
        Var h = tape.constant(std::move(x));
        for (std::size_t l = 0; l < config.num_layers; ++l)
            h = tape.tanh(dense(tape, h, params, "mlp" + std::to_string(l)));
        pooled = h;
    } else {
        Var embed_w = tape.parameter(params, "embed.w");
        Var embed_b = tape.parameter(params, "embed.b");
        std::vector<AttentionParams> attn;
        std::vector<std::pair<Var, Var>> out;
        for (std::size_t l = 0; l < config.num_layers; ++l) {
            const std::string p = "attn" + std::to_string(l);
            attn.push_back(attention_params(tape, params, p));
            out.emplace_back(tape.parameter(params, p + ".out.w"), tape.parameter(params, p + ".out.b"));
        }
        std::vector<Var> readouts;
        readouts.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const GraphSample& g = batch[i];
            Var h = tape.constant(g.node_features);
            h = tape.tanh(tape.add_row(tape.matmul(h, embed_w), embed_b));
            for (std::size_t l = 0; l < config.num_layers; ++l) {
                auto a = attention_layer(tape, h, g, attn[l], config.self_loops);
                h = tape.tanh(tape.add_row(tape.matmul(a.output, out[l].first), out[l].second));
            }
            readouts.push_back(tape.mean_rows(h));
        }
        pooled = tape.concat_rows(readouts);
    }
    return dense(tape, pooled, params, "head");
}

} // namespace

LossTape model_loss(const ParamVector& params, const Batch& batch, const ModelConfig& config) {
    LossTape result{0.0, Tape(params.layout())};
    Tape& tape = result.tape;
    Var outputs = forward_outputs(tape, params, batch, config);
    Tensor targets(batch.size(), 1);
    for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = batch[i].label;
    Var loss = config.task == TaskKind::classification ? tape.logistic_xent(outputs, targets)
                                                       : tape.squared_error(outputs, targets);
    tape.set_loss(loss);
    result.loss = tape.loss();
    return result;
}

std::vector<double> model_predict(const ParamVector& params, const Batch& batch,
                                  const ModelConfig& config) {
    Tape tape(params.layout());
    Var outputs = forward_outputs(tape, params, batch, config);
    const auto values = tape.value(outputs).values();
    return {values.begin(), values.end()};
}

} // namespace samlab
