#include "support.hpp"

#include "samlab/dataset.hpp"
#include "samlab/error.hpp"
#include "samlab/rng.hpp"
#include "samlab/tape.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace samlab;

namespace {

ParamVector zero_head(ParamVector p) {
    for (auto& v : p.segment("head.w")) v = 0.0;
    for (auto& v : p.segment("head.b")) v = 0.0;
    return p;
}

// Scalar-by-scalar evaluation of a one-layer attention model with self loops
// and logistic loss on a single graph.
double hand_attention_loss(const GraphSample& g, const ParamVector& p, std::size_t h) {
    const std::size_t n = g.num_nodes();
    const std::size_t d = g.node_dim();
    const auto w = [&](const char* seg, std::size_t r, std::size_t c, std::size_t cols) {
        return p.segment(seg)[r * cols + c];
    };
    std::vector<std::vector<double>> h0(n, std::vector<double>(h));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            double z = w("embed.b", 0, j, h);
            for (std::size_t k = 0; k < d; ++k) z += g.node_features.at(i, k) * w("embed.w", k, j, h);
            h0[i][j] = std::tanh(z);
        }
    auto project = [&](const char* seg) {
        std::vector<std::vector<double>> out(n, std::vector<double>(h, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < h; ++j)
                for (std::size_t k = 0; k < h; ++k) out[i][j] += h0[i][k] * w(seg, k, j, h);
        return out;
    };
    const auto q = project("attn0.query");
    const auto k = project("attn0.key");
    const auto v = project("attn0.value");
    const double edge_w = p.segment("attn0.edge")[0];

    std::vector<std::vector<double>> score(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<bool>> allowed(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        allowed[i][i] = true;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < h; ++c) s += q[i][c] * k[j][c];
            score[i][j] = s / std::sqrt(static_cast<double>(h));
        }
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        allowed[g.edges[e].dst][g.edges[e].src] = true;
        score[g.edges[e].dst][g.edges[e].src] += g.edge_features[e] * edge_w;
    }
    std::vector<double> readout(h, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j)
            if (allowed[i][j]) mx = std::max(mx, score[i][j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (allowed[i][j]) z += std::exp(score[i][j] - mx);
        std::vector<double> att(h, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (allowed[i][j])
                for (std::size_t c = 0; c < h; ++c) att[c] += std::exp(score[i][j] - mx) / z * v[j][c];
        for (std::size_t c = 0; c < h; ++c) {
            double o = w("attn0.out.b", 0, c, h);
            for (std::size_t m = 0; m < h; ++m) o += att[m] * w("attn0.out.w", m, c, h);
            readout[c] += std::tanh(o) / static_cast<double>(n);
        }
    }
    double logit = w("head.b", 0, 0, 1);
    for (std::size_t c = 0; c < h; ++c) logit += readout[c] * w("head.w", c, 0, 1);
    const double y = g.label;
    return std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) - y * logit;
}

Tensor attention_weights(const GraphSample& g, const Tensor& states, const ParamVector& p, bool self_loops) {
    Tape t(p.layout());
    const auto w = attention_params(t, p, "attn0");
    const auto r = attention_layer(t, t.constant(states), g, w, self_loops);
    return t.value(r.weights);
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("init is deterministic per seed and biases start at zero") {
    for (auto kind : {ModelKind::mlp, ModelKind::graph_attention}) {
        const auto cfg = test::small_model(kind, TaskKind::classification, 17);
        CHECK(init_model(cfg) == init_model(cfg));
        const auto p = init_model(cfg);
        for (const auto& s : p.layout()->segments())
            if (s.name.ends_with(".b"))
                for (double v : p.segment(s.name)) CHECK(v == 0.0);
    }
}

TEST_CASE("init weights stay within 1/sqrt(fan_in) over 1000 seeds") {
    auto cfg = test::small_model(ModelKind::graph_attention, TaskKind::classification, 0, 4);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        cfg.init_seed = seed;
        const auto p = init_model(cfg);
        for (const auto& s : p.layout()->segments()) {
            if (s.name.ends_with(".b")) continue;
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.shape[0]));
            for (double v : p.segment(s.name)) REQUIRE(std::abs(v) <= bound);
        }
    }
}

TEST_CASE("invalid model configs are rejected") {
    auto cfg = test::small_model(ModelKind::mlp, TaskKind::classification, 0);
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(init_model(cfg), ConfigError);
    cfg.hidden_dim = 4;
    cfg.num_layers = 5;
    CHECK_THROWS_AS(init_model(cfg), ConfigError);
    CHECK_THROWS_AS(parse_model_kind("transformer"), ConfigError);
}

TEST_CASE("zero logits give ln 2 per sample") {
    const auto graphs = test::small_graphs(6, 3);
    for (auto kind : {ModelKind::mlp, ModelKind::graph_attention}) {
        const auto cfg = test::small_model(kind, TaskKind::classification, 1);
        const auto p = zero_head(init_model(cfg));
        const auto r = model_loss(p, Batch::all(graphs), cfg);
        CHECK(r.loss == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    }
}

TEST_CASE("regression with exact predictions has zero loss") {
    auto graphs = test::small_graphs(5, 4);
    for (auto& g : graphs) g.label = 0.375;
    const auto cfg = test::small_model(ModelKind::graph_attention, TaskKind::regression, 2);
    auto p = zero_head(init_model(cfg));
    p.segment("head.b")[0] = 0.375;
    CHECK(model_loss(p, Batch::all(graphs), cfg).loss == 0.0);
}

TEST_CASE("attention model on a 3-node path matches a hand evaluation") {
    GraphSample g;
    const std::pair<std::size_t, std::size_t> path[] = {{0, 1}, {1, 2}};
    g.edges = undirected_edges(path);
    g.edge_dim = 1;
    g.edge_features = {0.5, 0.5, -1.0, -1.0};
    g.node_features = Tensor::matrix(3, 2, {1.0, 0.0, 0.0, 1.0, 0.5, -0.5});
    g.label = 1.0;
    ModelConfig cfg;
    cfg.node_dim = 2;
    cfg.edge_dim = 1;
    cfg.hidden_dim = 2;
    cfg.num_layers = 1;
    cfg.self_loops = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = test::random_params(model_layout(cfg), seed, 0.8);
        const std::vector<GraphSample> one{g};
        const double tape_loss = model_loss(p, Batch::all(one), cfg).loss;
        CHECK(test::relative_error(tape_loss, hand_attention_loss(g, p, 2), 1e-300) < 1e-12);
    }
}

TEST_CASE("single node with a self loop returns its value projection") {
    GraphSample g;
    g.node_features = Tensor::matrix(1, 3, {0.3, -0.2, 0.9});
    ModelConfig cfg = test::small_model(ModelKind::graph_attention, TaskKind::classification, 5, 3);
    cfg.edge_dim = 0;
    const auto p = test::random_params(model_layout(cfg), 5);
    Tape t(p.layout());
    Var x = t.constant(g.node_features);
    const auto w = attention_params(t, p, "attn0");
    const auto r = attention_layer(t, x, g, w, true);
    const Tensor expected = t.value(t.matmul(x, w.value));
    CHECK(t.value(r.weights).at(0, 0) == 1.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(t.value(r.output).at(0, c) == doctest::Approx(expected.at(0, c)));
}

TEST_CASE("two identical neighbours get equal attention") {
    GraphSample g;
    const std::pair<std::size_t, std::size_t> star[] = {{0, 1}, {0, 2}};
    g.edges = undirected_edges(star);
    g.node_features = Tensor::matrix(3, 2, {0.1, 0.2, 0.7, -0.3, 0.7, -0.3});
    ModelConfig cfg;
    cfg.node_dim = 2;
    cfg.hidden_dim = 2;
    cfg.num_layers = 1;
    cfg.edge_dim = 0;
    const auto p = test::random_params(model_layout(cfg), 9);
    const Tensor a = attention_weights(g, g.node_features, p, false);
    CHECK(a.at(0, 1) == doctest::Approx(0.5));
    CHECK(a.at(0, 2) == doctest::Approx(0.5));
    CHECK(a.at(0, 0) == 0.0);
}

TEST_CASE("4-node star attention matches brute-force softmax") {
    GraphSample g;
    const std::pair<std::size_t, std::size_t> star[] = {{0, 1}, {0, 2}, {0, 3}};
    g.edges = undirected_edges(star);
    g.edge_dim = 1;
    g.edge_features = {1.0, 1.0, 0.5, 0.5, -0.5, -0.5};
    Rng rng(11);
    g.node_features = Tensor(4, 3);
    for (auto& v : g.node_features.values()) v = rng.normal();
    ModelConfig cfg;
    cfg.node_dim = 3;
    cfg.hidden_dim = 3;
    cfg.num_layers = 1;
    cfg.edge_dim = 1;
    const auto p = test::random_params(model_layout(cfg), 11);
    const Tensor a = attention_weights(g, g.node_features, p, true);

    const auto states = g.node_features;
    const auto proj = [&](const char* seg, std::size_t i, std::size_t c) {
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += states.at(i, k) * p.segment(seg)[k * 3 + c];
        return s;
    };
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> score(4, 0.0);
        std::vector<bool> allowed(4, false);
        allowed[i] = true;
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t c = 0; c < 3; ++c) score[j] += proj("attn0.query", i, c) * proj("attn0.key", j, c);
        for (auto& s : score) s /= std::sqrt(3.0);
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            if (g.edges[e].dst == i) {
                allowed[g.edges[e].src] = true;
                score[g.edges[e].src] += g.edge_features[e] * p.segment("attn0.edge")[0];
            }
        double z = 0.0;
        for (std::size_t j = 0; j < 4; ++j)
            if (allowed[j]) z += std::exp(score[j]);
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            const double expected = allowed[j] ? std::exp(score[j]) / z : 0.0;
            CHECK(std::abs(a.at(i, j) - expected) < 1e-12);
            row += a.at(i, j);
        }
        CHECK(std::abs(row - 1.0) < 1e-12);
    }
}

TEST_CASE("attention rows sum to one and outputs are convex combinations") {
    const auto corpus = generate_motif_graphs(40, 21);
    ModelConfig cfg = test::small_model(ModelKind::graph_attention, TaskKind::classification, 3, 4);
    const auto p = init_model(cfg);
    for (const auto& g : corpus) {
        Tape t(p.layout());
        Var x = t.constant(g.node_features);
        Var h = t.tanh(t.add_row(t.matmul(x, t.parameter(p, "embed.w")), t.parameter(p, "embed.b")));
        const auto w = attention_params(t, p, "attn0");
        const auto r = attention_layer(t, h, g, w, true);
        const Tensor& a = t.value(r.weights);
        const Tensor& v = t.value(t.matmul(h, w.value));
        const Tensor& out = t.value(r.output);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < a.cols(); ++j) row += a.at(i, j);
            REQUIRE(std::abs(row - 1.0) < 1e-12);
        }
        for (std::size_t c = 0; c < v.cols(); ++c) {
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t j = 0; j < v.rows(); ++j) {
                lo = std::min(lo, v.at(j, c));
                hi = std::max(hi, v.at(j, c));
            }
            for (std::size_t i = 0; i < out.rows(); ++i) {
                REQUIRE(out.at(i, c) >= lo - 1e-12);
                REQUIRE(out.at(i, c) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("isolated node without self loop passes its state through") {
    GraphSample g;
    const std::pair<std::size_t, std::size_t> one[] = {{0, 1}};
    g.edges = undirected_edges(one);
    g.node_features = Tensor::matrix(3, 2, {0.1, 0.2, 0.3, 0.4, -0.8, 0.6});
    ModelConfig cfg;
    cfg.node_dim = 2;
    cfg.hidden_dim = 2;
    cfg.num_layers = 1;
    cfg.edge_dim = 0;
    const auto p = test::random_params(model_layout(cfg), 2);
    Tape t(p.layout());
    const auto w = attention_params(t, p, "attn0");
    const auto r = attention_layer(t, t.constant(g.node_features), g, w, false);
    CHECK(t.value(r.output).at(2, 0) == -0.8);
    CHECK(t.value(r.output).at(2, 1) == 0.6);
}

TEST_CASE("permuting node order leaves the loss unchanged") {
    const auto graphs = generate_motif_graphs(10, 8);
    const auto cfg = test::small_model(ModelKind::graph_attention, TaskKind::classification, 4, 6);
    const auto p = init_model(cfg);
    Rng rng(99);
    for (const auto& g : graphs) {
        std::vector<std::size_t> perm(g.num_nodes());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        const std::vector<GraphSample> a{g}, b{permute_nodes(g, perm)};
        const double la = model_loss(p, Batch::all(a), cfg).loss;
        const double lb = model_loss(p, Batch::all(b), cfg).loss;
        CHECK(std::abs(la - lb) < 1e-9);
    }
}

TEST_CASE("model gradients match central differences") {
    const auto graphs = test::small_graphs(3, 6);
    for (auto kind : {ModelKind::mlp, ModelKind::graph_attention})
        for (auto task : {TaskKind::classification, TaskKind::regression})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto cfg = test::small_model(kind, task, seed, 4);
                const ModelObjective obj(cfg, Batch::all(graphs));
                CHECK(test::finite_difference_check(obj, init_model(cfg)).max_relative_error < 1e-5);
            }
}

TEST_CASE("feature width mismatch is a shape error") {
    const auto graphs = test::small_graphs(2, 1, 3, 4, 3);
    const auto cfg = test::small_model(ModelKind::graph_attention, TaskKind::classification, 0);
    CHECK_THROWS_AS(model_loss(init_model(cfg), Batch::all(graphs), cfg), ShapeError);
    CHECK_THROWS_AS(model_loss(init_model(cfg), Batch{}, cfg), ShapeError);
}

} // TEST_SUITE
