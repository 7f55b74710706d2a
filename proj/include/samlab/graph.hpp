#pragma once

#include "samlab/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace samlab {

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    bool operator==(const Edge&) const = default;
};

// Attributed graph with a scalar label: a class index (0/1) for
// classification or a real target for regression. Undirected graphs store
// each edge in both directions.
struct GraphSample {
    Tensor node_features;              // num_nodes x node_dim
    std::vector<Edge> edges;
    std::size_t edge_dim = 0;
    std::vector<double> edge_features; // edges.size() * edge_dim, row-major
    double label = 0.0;
    bool allow_self_loops = false;
    bool directed = false;

    std::size_t num_nodes() const { return node_features.rows(); }
    std::size_t node_dim() const { return node_features.cols(); }
    std::span<const double> edge_feature(std::size_t e) const {
        return std::span<const double>(edge_features).subspan(e * edge_dim, edge_dim);
    }

    bool operator==(const GraphSample&) const = default;
};

// Throws ShapeError / NumericError / ConfigError on a malformed sample.
void validate(const GraphSample& g);

// Undirected edge list (both directions) from unordered pairs.
std::vector<Edge> undirected_edges(std::span<const std::pair<std::size_t, std::size_t>> pairs);

// Count of unordered node triples that are pairwise adjacent.
std::size_t count_triangles(const GraphSample& g);

// Same graph with node ids relabelled: new id of old node i is perm[i].
GraphSample permute_nodes(const GraphSample& g, std::span<const std::size_t> perm);

// Non-owning view of a mini-batch. offsets has one entry per sample plus a
// trailing total: offsets[i] is the first packed node of sample i.
class Batch {
public:
    Batch() = default;
    static Batch of(std::span<const GraphSample> dataset, std::span<const std::size_t> indices);
    static Batch all(std::span<const GraphSample> dataset);

    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const GraphSample& operator[](std::size_t i) const { return *samples_[i]; }
    const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    std::size_t total_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }

private:
    std::vector<const GraphSample*> samples_;
    std::vector<std::size_t> offsets_;
};

} // namespace samlab
