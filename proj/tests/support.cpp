#include "support.hpp"

#include "samlab/dataset.hpp"
#include "samlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace samlab::test {

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradientCheck finite_difference_check(const Objective& objective, const ParamVector& params, double h) {
    const GradVector grad = objective.evaluate(params).grad;
    GradientCheck out;
    ParamVector probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = objective.loss(probe);
        probe[i] = saved - h;
        const double down = objective.loss(probe);
        probe[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        out.max_relative_error = std::max(out.max_relative_error, relative_error(grad[i], fd));
        ++out.coordinates;
    }
    return out;
}

ParamVector random_params(const LayoutPtr& layout, std::uint64_t seed, double scale) {
    ParamVector p(layout);
    Rng rng(seed);
    for (auto& v : p.values()) v = scale * rng.normal();
    return p;
}

std::vector<GraphSample> small_graphs(std::size_t count, std::uint64_t seed, std::size_t min_nodes,
                                      std::size_t max_nodes, std::size_t node_dim) {
    Rng rng(seed);
    std::vector<GraphSample> out;
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t n = rng.range(min_nodes, max_nodes);
        std::set<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t v = 1; v < n; ++v) pairs.emplace(rng.below(v), v); // spanning tree
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = u + 1; v < n; ++v)
                if (rng.bernoulli(0.3)) pairs.emplace(u, v);
        std::vector<std::pair<std::size_t, std::size_t>> list(pairs.begin(), pairs.end());
        GraphSample g;
        g.edges = undirected_edges(list);
        g.edge_dim = 1;
        for (std::size_t e = 0; e < g.edges.size(); ++e) g.edge_features.push_back(rng.uniform(0.5, 1.5));
        g.node_features = Tensor(n, node_dim);
        for (auto& v : g.node_features.values()) v = rng.normal();
        g.label = count_triangles(g) > 0 ? 1.0 : 0.0;
        out.push_back(std::move(g));
    }
    return out;
}

ModelConfig small_model(ModelKind kind, TaskKind task, std::uint64_t init_seed, std::size_t hidden) {
    ModelConfig c;
    c.kind = kind;
    c.task = task;
    c.node_dim = 4;
    c.edge_dim = 1;
    c.hidden_dim = hidden;
    c.num_layers = 2;
    c.init_seed = init_seed;
    return c;
}

std::unique_ptr<Objective> BatchStream::objective(std::size_t step) const {
    const auto& idx = batches[step % batches.size()];
    return std::make_unique<ModelObjective>(model, Batch::of(data, idx));
}

BatchStream motif_stream(std::uint64_t seed, std::size_t samples, std::size_t batch_size, std::size_t hidden) {
    BatchStream s;
    s.data = generate_motif_graphs(samples, seed);
    s.model = small_model(ModelKind::graph_attention, TaskKind::classification, seed + 1, hidden);
    std::vector<std::size_t> order(samples);
    for (std::size_t i = 0; i < samples; ++i) order[i] = i;
    Rng rng(seed + 2);
    rng.shuffle(order);
    for (std::size_t start = 0; start < samples; start += batch_size)
        s.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                               order.begin() + static_cast<std::ptrdiff_t>(std::min(samples, start + batch_size)));
    return s;
}

QuadraticObjective random_quadratic(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> h(dim), c(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        h[i] = rng.uniform(0.2, 3.0);
        c[i] = rng.normal();
    }
    return QuadraticObjective(std::move(h), std::move(c));
}

std::vector<ParamVector> trajectory(SamOptimizer& optimizer, ParamVector params,
                                    const std::function<const Objective&(std::size_t)>& objective_at,
                                    std::size_t steps, std::size_t steps_per_epoch,
                                    std::vector<StepOutcome>* outcomes) {
    std::vector<ParamVector> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        if (t % steps_per_epoch == 0) optimizer.begin_epoch(t / steps_per_epoch);
        StepOutcome o = optimizer.step(params, objective_at(t));
        if (outcomes) outcomes->push_back(std::move(o));
        out.push_back(params);
    }
    return out;
}

} // namespace samlab::test

namespace samlab::test {

Evaluation TapeObjective::evaluate(const ParamVector& params) const {
    Tape tape(params.layout());
    tape.set_loss(build_(tape, params));
    return {tape.loss(), tape.backward()};
}

double TapeObjective::loss(const ParamVector& params) const {
    Tape tape(params.layout());
    tape.set_loss(build_(tape, params));
    return tape.loss();
}

} // namespace samlab::test
