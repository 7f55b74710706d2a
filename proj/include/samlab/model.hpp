#pragma once

#include "samlab/graph.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/tape.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace samlab {

enum class ModelKind { mlp, graph_attention };
enum class TaskKind { classification, regression };

std::string to_string(ModelKind kind);
std::string to_string(TaskKind kind);
ModelKind parse_model_kind(const std::string& text);
TaskKind parse_task_kind(const std::string& text);

struct ModelConfig {
    ModelKind kind = ModelKind::graph_attention;
    TaskKind task = TaskKind::classification;
    std::size_t node_dim = 4;
    std::size_t edge_dim = 1;
    std::size_t hidden_dim = 16;
    std::size_t num_layers = 2;
    bool self_loops = true;
    std::uint64_t init_seed = 0;

    // hidden_dim >= 1, num_layers in [1, 4], node_dim >= 1.
    void validate() const;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in the row
// count of the weight matrix; segments named "*.b" are biases and start at zero.
ParamVector init_model(const ModelConfig& config);
LayoutPtr model_layout(const ModelConfig& config);

struct LossTape {
    double loss = 0.0;
    Tape tape;
};

// Mean loss over the batch: logistic cross-entropy on one logit per sample
// for classification, squared error for regression. The returned tape holds
// every intermediate needed for tape.backward().
LossTape model_loss(const ParamVector& params, const Batch& batch, const ModelConfig& config);

// Raw model outputs (logits or regression values), one per sample.
std::vector<double> model_predict(const ParamVector& params, const Batch& batch,
                                  const ModelConfig& config);

struct AttentionResult {
    Var output;   // n x d, rows are convex combinations of value rows
    Var weights;  // n x n, row v holds the weights node v puts on each source
};

// Parameter leaves of one attention layer: segments "<prefix>.query|key|value"
// and, when the layout has it, "<prefix>.edge".
struct AttentionParams {
    Var query;
    Var key;
    Var value;
    std::optional<Var> edge;
};
AttentionParams attention_params(Tape& tape, const ParamVector& params, const std::string& prefix);

// Single-head scaled dot-product attention over in-neighbours (plus self when
// `self_loops`). Edge features add a learned bias to the score of their edge.
// A node with nothing to attend to keeps its input state.
AttentionResult attention_layer(Tape& tape, Var node_states, const GraphSample& graph,
                                const AttentionParams& weights, bool self_loops);

} // namespace samlab
