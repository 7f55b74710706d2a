#pragma once

#include "samlab/graph.hpp"
#include "samlab/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace samlab {

// Random graphs with 8-20 nodes, Erdos-Renyi edges (p = 0.25), 4 node features
// (degree / 4 plus three standard-normal channels) and one constant edge
// feature. Each sample first draws its class with probability 1/2; positives
// get a planted triangle if the random graph has none, negatives have edges of
// triangles removed until none remain. The label is then recomputed by
// exhaustive enumeration: triangle present (classification) or
// triangles / nodes (regression).
std::vector<GraphSample> generate_motif_graphs(std::size_t n, std::uint64_t seed,
                                               TaskKind task = TaskKind::classification);

// Two interleaved half-circles in 2-D, each point a single-node graph.
std::vector<GraphSample> generate_moons(std::size_t n, std::uint64_t seed, double noise = 0.15);

// Graph CSV: optional '#' comment lines, then one block per graph separated by
// blank lines. A block is a header record `num_nodes,num_edges,d_node,d_edge,label`,
// num_nodes node-feature rows of d_node values, and num_edges edge rows
// `u,v,f_1..f_d_edge`. Undirected graphs list both directions.
void write_graph_csv(std::ostream& out, const std::vector<GraphSample>& samples);
void write_graph_csv(const std::filesystem::path& path, const std::vector<GraphSample>& samples);
std::vector<GraphSample> read_graph_csv(std::istream& in, const std::string& source = "<csv>");
std::vector<GraphSample> load_graph_csv(const std::filesystem::path& path);

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Seeded shuffle, then the first floor(train_ratio * n) indices train, the next
// floor(val_ratio * n) validate and the rest test. Ratios must sum to 1.
DatasetSplit split_dataset(std::size_t n, double train_ratio, double val_ratio, double test_ratio,
                           std::uint64_t seed);

} // namespace samlab
