#include "samlab/graph.hpp"

#include "samlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace samlab {

void validate(const GraphSample& g) {
    if (g.node_features.rank() != 2 || g.num_nodes() == 0)
        throw ShapeError("graph: node_features must be a non-empty num_nodes x node_dim matrix");
    if (!g.node_features.all_finite()) throw NumericError("graph: non-finite node feature");
    if (g.edge_features.size() != g.edges.size() * g.edge_dim)
        throw ShapeError("graph: " + std::to_string(g.edges.size()) + " edges with edge_dim " +
                         std::to_string(g.edge_dim) + " need " +
                         std::to_string(g.edges.size() * g.edge_dim) + " edge feature values, got " +
                         std::to_string(g.edge_features.size()));
    for (double v : g.edge_features)
        if (!std::isfinite(v)) throw NumericError("graph: non-finite edge feature");
    if (!std::isfinite(g.label)) throw NumericError("graph: non-finite label");

    const std::size_t n = g.num_nodes();
    std::set<std::pair<std::size_t, std::size_t>> present;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto [u, v] = g.edges[e];
        if (u >= n || v >= n)
            throw ShapeError("graph: edge " + std::to_string(e) + " (" + std::to_string(u) + "," +
                             std::to_string(v) + ") out of range for " + std::to_string(n) + " nodes");
        if (u == v && !g.allow_self_loops)
            throw ConfigError("graph: self-loop on node " + std::to_string(u) + " not allowed");
        present.emplace(u, v);
    }
    if (!g.directed)
        for (const auto& [u, v] : present)
            if (!present.contains({v, u}))
                throw ConfigError("graph: undirected edge (" + std::to_string(u) + "," +
                                  std::to_string(v) + ") missing its reverse direction");
}

std::vector<Edge> undirected_edges(std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    std::vector<Edge> out;
    out.reserve(pairs.size() * 2);
    for (const auto& [u, v] : pairs) {
        out.push_back({u, v});
        out.push_back({v, u});
    }
    return out;
}

std::size_t count_triangles(const GraphSample& g) {
    const std::size_t n = g.num_nodes();
    std::vector<char> adj(n * n, 0);
    for (const auto& e : g.edges)
        if (e.src != e.dst) {
            adj[e.src * n + e.dst] = 1;
            adj[e.dst * n + e.src] = 1;
        }
    std::size_t count = 0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            if (!adj[a * n + b]) continue;
            for (std::size_t c = b + 1; c < n; ++c)
                if (adj[a * n + c] && adj[b * n + c]) ++count;
        }
    return count;
}

GraphSample permute_nodes(const GraphSample& g, std::span<const std::size_t> perm) {
    const std::size_t n = g.num_nodes();
    if (perm.size() != n) throw ShapeError("permute_nodes: permutation size mismatch");
    GraphSample out = g;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g.node_dim(); ++j)
            out.node_features.at(perm[i], j) = g.node_features.at(i, j);
    for (auto& e : out.edges) e = Edge{perm[e.src], perm[e.dst]};
    return out;
}

Batch Batch::of(std::span<const GraphSample> dataset, std::span<const std::size_t> indices) {
    Batch b;
    b.samples_.reserve(indices.size());
    b.offsets_.reserve(indices.size() + 1);
    b.offsets_.push_back(0);
    for (std::size_t i : indices) {
        if (i >= dataset.size())
            throw ShapeError("batch: sample index " + std::to_string(i) + " out of range");
        b.samples_.push_back(&dataset[i]);
        b.offsets_.push_back(b.offsets_.back() + dataset[i].num_nodes());
    }
    return b;
}

Batch Batch::all(std::span<const GraphSample> dataset) {
    std::vector<std::size_t> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return of(dataset, idx);
}

} // namespace samlab
