#pragma once

#include "samlab/param_vector.hpp"
#include "samlab/tensor.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace samlab {

enum class Op {
    constant,
    parameter,
    matmul,
    add,
    add_row,       // broadcast a 1 x c row over every row
    scale,         // multiply by a fixed scalar
    transpose,
    relu,
    tanh,
    softmax,       // row-wise, optional 0/1 mask
    mean_rows,     // column means, 1 x c
    mean,          // mean of all entries, 1 x 1
    scatter,       // place x[i] at flat position idx[i] of a zero tensor
    concat_rows,
    squared_error, // mean (pred - target)^2 against a constant target
    logistic_xent, // mean binary cross-entropy with logits
};

const char* op_name(Op op) noexcept;

// Handle to a node on a Tape.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

// Define-by-run record of dense ops. Nodes are appended in evaluation order,
// so every input id precedes its consumer and one reverse sweep visits each
// node exactly once.
//
// Every op validates shapes and rejects non-finite outputs on the spot.
class Tape {
public:
    Tape() = default;
    explicit Tape(LayoutPtr layout) : layout_(std::move(layout)) {}

    Var constant(Tensor value);
    // Leaf reading one segment of `params`; its gradient lands in that
    // segment of the GradVector returned by backward().
    Var parameter(const ParamVector& params, std::string_view segment);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var add_row(Var a, Var row);
    Var scale(Var a, double factor);
    Var transpose(Var a);
    Var relu(Var a);
    Var tanh(Var a);
    // Rows with no unmasked entry come out as all zeros.
    Var softmax(Var a);
    Var softmax(Var a, const Tensor& mask);
    Var mean_rows(Var a);
    Var mean(Var a);
    Var scatter(Var x, std::vector<std::size_t> positions, Shape shape);
    Var concat_rows(std::span<const Var> parts);
    Var squared_error(Var prediction, const Tensor& target);
    Var logistic_xent(Var logits, const Tensor& labels);

    const Tensor& value(Var v) const;
    Op op(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Marks a 1 x 1 node as the loss. Required before backward().
    void set_loss(Var v);
    bool has_loss() const noexcept { return loss_.id < nodes_.size(); }
    double loss() const;

    // Gradient of the loss with respect to every parameter leaf, laid out like
    // the ParamVector the tape was built against. Segments never read by the
    // tape get zeros.
    GradVector backward() const;
    // Number of nodes the most recent backward() visited.
    std::size_t last_backward_visits() const noexcept { return visits_; }

private:
    struct Node {
        Op op = Op::constant;
        std::size_t a = npos;
        std::size_t b = npos;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor aux;
        std::vector<std::size_t> index;
        double factor = 0.0;
        std::size_t segment = npos;
    };
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    const Node& node(Var v) const;
    Var push(Node n);

    LayoutPtr layout_;
    std::vector<Node> nodes_;
    Var loss_;
    mutable std::size_t visits_ = 0;
};

} // namespace samlab
