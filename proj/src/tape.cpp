#include "samlab/tape.hpp"

#include "samlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

const char* op_name(Op op) noexcept {
    switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::add_row: return "add_row";
    case Op::scale: return "scale";
    case Op::transpose: return "transpose";
    case Op::relu: return "relu";
    case Op::tanh: return "tanh";
    case Op::softmax: return "softmax";
    case Op::mean_rows: return "mean_rows";
    case Op::mean: return "mean";
    case Op::scatter: return "scatter";
    case Op::concat_rows: return "concat_rows";
    case Op::squared_error: return "squared_error";
    case Op::logistic_xent: return "logistic_xent";
    }
    return "unknown";
}

namespace {

[[noreturn]] void shape_fail(Op op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + to_string(a) + " and " +
                     to_string(b));
}

void require_rank2(Op op, const Tensor& t) {
    if (t.rank() != 2)
        throw ShapeError(std::string(op_name(op)) + ": expected rank-2 operand, got " +
                         to_string(t.shape()));
}

void accumulate(Tensor& into, const Tensor& g) {
    if (into.size() == 0) {
        into = g;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw UsageError("tape: unknown node id " + std::to_string(v.id));
    return nodes_[v.id];
}

Var Tape::push(Node n) {
    if (!n.value.all_finite())
        throw NumericError(std::string(op_name(n.op)) + ": non-finite value in forward pass");
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
Op Tape::op(Var v) const { return node(v).op; }

Var Tape::constant(Tensor value) {
    require_rank2(Op::constant, value);
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::parameter(const ParamVector& params, std::string_view segment) {
    if (!layout_) layout_ = params.layout();
    if (params.layout() != layout_ && !(*params.layout() == *layout_))
        throw SegmentMismatch("parameter: ParamVector layout differs from the tape's layout");
    Node n;
    n.op = Op::parameter;
    n.segment = layout_->index_of(segment);
    n.value = params.segment_tensor(segment);
    require_rank2(Op::parameter, n.value);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    require_rank2(Op::matmul, x);
    require_rank2(Op::matmul, y);
    if (x.cols() != y.rows()) shape_fail(Op::matmul, x.shape(), y.shape());
    const std::size_t m = x.rows(), k = x.cols(), p = y.cols();
    Node n;
    n.op = Op::matmul;
    n.a = a.id;
    n.b = b.id;
    n.value = Tensor(m, p);
    // i-k-j order: each output entry still accumulates over k in ascending order.
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double xv = x.at(i, kk);
            for (std::size_t j = 0; j < p; ++j) n.value.at(i, j) += xv * y.at(kk, j);
        }
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.shape() != y.shape()) shape_fail(Op::add, x.shape(), y.shape());
    Node n;
    n.op = Op::add;
    n.a = a.id;
    n.b = b.id;
    n.value = x;
    for (std::size_t i = 0; i < y.size(); ++i) n.value[i] += y[i];
    return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
    const Tensor& x = value(a);
    const Tensor& r = value(row);
    require_rank2(Op::add_row, x);
    require_rank2(Op::add_row, r);
    if (r.rows() != 1 || r.cols() != x.cols()) shape_fail(Op::add_row, x.shape(), r.shape());
    Node n;
    n.op = Op::add_row;
    n.a = a.id;
    n.b = row.id;
    n.value = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) n.value.at(i, j) += r[j];
    return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
    if (!std::isfinite(factor)) throw NumericError("scale: non-finite factor");
    Node n;
    n.op = Op::scale;
    n.a = a.id;
    n.factor = factor;
    n.value = value(a);
    for (auto& v : n.value.values()) v *= factor;
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    const Tensor& x = value(a);
    require_rank2(Op::transpose, x);
    Node n;
    n.op = Op::transpose;
    n.a = a.id;
    n.value = Tensor(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) n.value.at(j, i) = x.at(i, j);
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Node n;
    n.op = Op::relu;
    n.a = a.id;
    n.value = value(a);
    for (auto& v : n.value.values()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    Node n;
    n.op = Op::tanh;
    n.a = a.id;
    n.value = value(a);
    for (auto& v : n.value.values()) v = std::tanh(v);
    return push(std::move(n));
}

Var Tape::softmax(Var a) {
    const Tensor& x = value(a);
    require_rank2(Op::softmax, x);
    Tensor mask(x.shape());
    for (auto& v : mask.values()) v = 1.0;
    return softmax(a, mask);
}

Var Tape::softmax(Var a, const Tensor& mask) {
    const Tensor& x = value(a);
    require_rank2(Op::softmax, x);
    if (mask.shape() != x.shape()) shape_fail(Op::softmax, x.shape(), mask.shape());
    Node n;
    n.op = Op::softmax;
    n.a = a.id;
    n.aux = mask;
    n.value = Tensor(x.shape());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double hi = -INFINITY;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask.at(i, j) != 0.0) hi = std::max(hi, x.at(i, j));
        if (hi == -INFINITY) continue;
        double total = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (mask.at(i, j) != 0.0) {
                const double e = std::exp(x.at(i, j) - hi);
                n.value.at(i, j) = e;
                total += e;
            }
        for (std::size_t j = 0; j < x.cols(); ++j) n.value.at(i, j) /= total;
    }
    return push(std::move(n));
}

Var Tape::mean_rows(Var a) {
    const Tensor& x = value(a);
    require_rank2(Op::mean_rows, x);
    Node n;
    n.op = Op::mean_rows;
    n.a = a.id;
    n.value = Tensor(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) n.value[j] += x.at(i, j);
    for (auto& v : n.value.values()) v /= static_cast<double>(x.rows());
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    const Tensor& x = value(a);
    Node n;
    n.op = Op::mean;
    n.a = a.id;
    double total = 0.0;
    for (double v : x.values()) total += v;
    n.value = Tensor(1, 1);
    n.value[0] = total / static_cast<double>(x.size());
    return push(std::move(n));
}

Var Tape::scatter(Var x, std::vector<std::size_t> positions, Shape shape) {
    const Tensor& src = value(x);
    if (positions.size() != src.size())
        throw ShapeError("scatter: " + std::to_string(positions.size()) + " positions for operand " +
                         to_string(src.shape()));
    Node n;
    n.op = Op::scatter;
    n.a = x.id;
    n.value = Tensor(std::move(shape));
    require_rank2(Op::scatter, n.value);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= n.value.size())
            throw ShapeError("scatter: position " + std::to_string(positions[i]) +
                             " outside target " + to_string(n.value.shape()));
        n.value[positions[i]] += src[i];
    }
    n.index = std::move(positions);
    return push(std::move(n));
}

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no operands");
    const std::size_t cols = value(parts[0]).cols();
    std::size_t rows = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        require_rank2(Op::concat_rows, t);
        if (t.cols() != cols) shape_fail(Op::concat_rows, value(parts[0]).shape(), t.shape());
        rows += t.rows();
    }
    Node n;
    n.op = Op::concat_rows;
    n.value = Tensor(rows, cols);
    std::size_t at = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        std::copy(t.values().begin(), t.values().end(), n.value.values().begin() + static_cast<std::ptrdiff_t>(at));
        at += t.size();
        n.inputs.push_back(p.id);
    }
    return push(std::move(n));
}

Var Tape::squared_error(Var prediction, const Tensor& target) {
    const Tensor& p = value(prediction);
    if (p.shape() != target.shape()) shape_fail(Op::squared_error, p.shape(), target.shape());
    Node n;
    n.op = Op::squared_error;
    n.a = prediction.id;
    n.aux = target;
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p[i] - target[i];
        total += r * r;
    }
    n.value = Tensor(1, 1);
    n.value[0] = total / static_cast<double>(p.size());
    return push(std::move(n));
}

Var Tape::logistic_xent(Var logits, const Tensor& labels) {
    const Tensor& z = value(logits);
    if (z.shape() != labels.shape()) shape_fail(Op::logistic_xent, z.shape(), labels.shape());
    Node n;
    n.op = Op::logistic_xent;
    n.a = logits.id;
    n.aux = labels;
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        // softplus(z) - y z, written to avoid overflow for large |z|
        total += std::max(z[i], 0.0) - z[i] * labels[i] + std::log1p(std::exp(-std::abs(z[i])));
    }
    n.value = Tensor(1, 1);
    n.value[0] = total / static_cast<double>(z.size());
    return push(std::move(n));
}

void Tape::set_loss(Var v) {
    const Tensor& t = value(v);
    if (t.size() != 1) throw ShapeError("set_loss: loss must be 1x1, got " + to_string(t.shape()));
    loss_ = v;
}

double Tape::loss() const {
    if (!has_loss()) throw UsageError("tape: no loss recorded; run a forward pass first");
    return nodes_[loss_.id].value[0];
}

GradVector Tape::backward() const {
    if (!has_loss()) throw UsageError("backward: no loss recorded; run a forward pass first");
    if (!layout_) throw UsageError("backward: tape has no parameter layout");

    GradVector out(layout_);
    std::vector<Tensor> grads(loss_.id + 1);
    grads[loss_.id] = Tensor::scalar(1.0);
    visits_ = 0;

    for (std::size_t id = loss_.id + 1; id-- > 0;) {
        const Node& n = nodes_[id];
        ++visits_;
        const Tensor& g = grads[id];
        if (g.size() == 0) continue;

        switch (n.op) {
        case Op::constant:
            break;
        case Op::parameter: {
            const Segment& seg = layout_->segments()[n.segment];
            for (std::size_t i = 0; i < g.size(); ++i) out[seg.offset + i] += g[i];
            break;
        }
        case Op::matmul: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& y = nodes_[n.b].value;
            const std::size_t m = x.rows(), k = x.cols(), p = y.cols();
            Tensor gx(m, k), gy(k, p);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < p; ++j) acc += g.at(i, j) * y.at(kk, j);
                    gx.at(i, kk) = acc;
                }
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double xv = x.at(i, kk);
                    for (std::size_t j = 0; j < p; ++j) gy.at(kk, j) += xv * g.at(i, j);
                }
            accumulate(grads[n.a], gx);
            accumulate(grads[n.b], gy);
            break;
        }
        case Op::add:
            accumulate(grads[n.a], g);
            accumulate(grads[n.b], g);
            break;
        case Op::add_row: {
            Tensor gr(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g.at(i, j);
            accumulate(grads[n.a], g);
            accumulate(grads[n.b], gr);
            break;
        }
        case Op::scale: {
            Tensor gx = g;
            for (auto& v : gx.values()) v *= n.factor;
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::transpose: {
            Tensor gx(g.cols(), g.rows());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gx.at(j, i) = g.at(i, j);
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::relu: {
            Tensor gx = g;
            for (std::size_t i = 0; i < gx.size(); ++i)
                if (n.value[i] <= 0.0) gx[i] = 0.0;
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::tanh: {
            Tensor gx = g;
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - n.value[i] * n.value[i];
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::softmax: {
            const Tensor& y = n.value;
            Tensor gx(y.shape());
            for (std::size_t i = 0; i < y.rows(); ++i) {
                double inner = 0.0;
                for (std::size_t j = 0; j < y.cols(); ++j) inner += y.at(i, j) * g.at(i, j);
                for (std::size_t j = 0; j < y.cols(); ++j)
                    gx.at(i, j) = y.at(i, j) * (g.at(i, j) - inner);
            }
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::mean_rows: {
            const Tensor& x = nodes_[n.a].value;
            Tensor gx(x.shape());
            const double inv = 1.0 / static_cast<double>(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < x.cols(); ++j) gx.at(i, j) = g[j] * inv;
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::mean: {
            Tensor gx(nodes_[n.a].value.shape());
            const double share = g[0] / static_cast<double>(gx.size());
            for (auto& v : gx.values()) v = share;
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::scatter: {
            Tensor gx(nodes_[n.a].value.shape());
            for (std::size_t i = 0; i < n.index.size(); ++i) gx[i] = g[n.index[i]];
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::concat_rows: {
            std::size_t at = 0;
            for (std::size_t in : n.inputs) {
                Tensor gx(nodes_[in].value.shape());
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[at + i];
                at += gx.size();
                accumulate(grads[in], gx);
            }
            break;
        }
        case Op::squared_error: {
            const Tensor& p = nodes_[n.a].value;
            Tensor gx(p.shape());
            const double c = 2.0 * g[0] / static_cast<double>(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) gx[i] = c * (p[i] - n.aux[i]);
            accumulate(grads[n.a], gx);
            break;
        }
        case Op::logistic_xent: {
            const Tensor& z = nodes_[n.a].value;
            Tensor gx(z.shape());
            const double c = g[0] / static_cast<double>(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) gx[i] = c * (sigmoid(z[i]) - n.aux[i]);
            accumulate(grads[n.a], gx);
            break;
        }
        }
    }
    if (!out.all_finite()) throw NumericError("backward: non-finite gradient");
    return out;
}

} // namespace samlab
