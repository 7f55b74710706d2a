#include "samlab/dataset.hpp"

#include "samlab/diagnostics.hpp"
#include "samlab/error.hpp"
#include "samlab/rng.hpp"

#include <array>
#include <charconv>
#include <optional>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace samlab {

namespace {

using Adjacency = std::set<std::pair<std::size_t, std::size_t>>; // u < v

bool adjacent(const Adjacency& adj, std::size_t a, std::size_t b) {
    return adj.contains({std::min(a, b), std::max(a, b)});
}

// First triangle in lexicographic order, if any.
std::optional<std::array<std::size_t, 3>> find_triangle(const Adjacency& adj, std::size_t n) {
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            if (!adjacent(adj, a, b)) continue;
            for (std::size_t c = b + 1; c < n; ++c)
                if (adjacent(adj, a, c) && adjacent(adj, b, c)) return std::array{a, b, c};
        }
    return std::nullopt;
}

} // namespace

std::vector<GraphSample> generate_motif_graphs(std::size_t n, std::uint64_t seed, TaskKind task) {
    if (n < 1) throw ConfigError("generate_motif_graphs: n must be >= 1");
    Rng rng(seed);
    std::vector<GraphSample> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t nodes = rng.range(8, 20);
        const bool want_triangle = rng.bernoulli(0.5);
        Adjacency adj;
        for (std::size_t u = 0; u < nodes; ++u)
            for (std::size_t v = u + 1; v < nodes; ++v)
                if (rng.bernoulli(0.25)) adj.emplace(u, v);

        if (want_triangle) {
            if (!find_triangle(adj, nodes)) {
                std::vector<std::size_t> ids(nodes);
                for (std::size_t i = 0; i < nodes; ++i) ids[i] = i;
                rng.shuffle(ids);
                const std::size_t a = ids[0], b = ids[1], c = ids[2];
                adj.emplace(std::min(a, b), std::max(a, b));
                adj.emplace(std::min(a, c), std::max(a, c));
                adj.emplace(std::min(b, c), std::max(b, c));
            }
        } else {
            while (auto tri = find_triangle(adj, nodes)) {
                const auto& t = *tri;
                const std::size_t drop = rng.below(3);
                const std::size_t a = t[drop], b = t[(drop + 1) % 3];
                adj.erase({std::min(a, b), std::max(a, b)});
            }
        }

        std::vector<std::pair<std::size_t, std::size_t>> pairs(adj.begin(), adj.end());
        GraphSample g;
        g.edges = undirected_edges(pairs);
        g.edge_dim = 1;
        g.edge_features.assign(g.edges.size(), 1.0);
        std::vector<std::size_t> degree(nodes, 0);
        for (const auto& e : g.edges) ++degree[e.src];
        g.node_features = Tensor(nodes, 4);
        for (std::size_t i = 0; i < nodes; ++i) {
            g.node_features.at(i, 0) = static_cast<double>(degree[i]) / 4.0;
            for (std::size_t c = 1; c < 4; ++c) g.node_features.at(i, c) = rng.normal();
        }
        const std::size_t triangles = count_triangles(g);
        g.label = task == TaskKind::classification
                      ? (triangles > 0 ? 1.0 : 0.0)
                      : static_cast<double>(triangles) / static_cast<double>(nodes);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GraphSample> generate_moons(std::size_t n, std::uint64_t seed, double noise) {
    if (n < 1) throw ConfigError("generate_moons: n must be >= 1");
    if (!(noise >= 0.0)) throw ConfigError("generate_moons: noise must be >= 0");
    Rng rng(seed);
    std::vector<GraphSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool upper = i % 2 == 0;
        const double t = rng.uniform(0.0, std::numbers::pi);
        double x = upper ? std::cos(t) : 1.0 - std::cos(t);
        double y = upper ? std::sin(t) : 0.5 - std::sin(t);
        x += noise * rng.normal();
        y += noise * rng.normal();
        GraphSample g;
        g.node_features = Tensor::matrix(1, 2, {x, y});
        g.label = upper ? 0.0 : 1.0;
        out.push_back(std::move(g));
    }
    return out;
}

void write_graph_csv(std::ostream& out, const std::vector<GraphSample>& samples) {
    out << "#nodes,#edges,d_node,d_edge,label\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& g = samples[s];
        if (s) out << '\n';
        out << g.num_nodes() << ',' << g.edges.size() << ',' << g.node_dim() << ',' << g.edge_dim
            << ',' << format_real(g.label) << '\n';
        for (std::size_t i = 0; i < g.num_nodes(); ++i) {
            for (std::size_t j = 0; j < g.node_dim(); ++j)
                out << (j ? "," : "") << format_real(g.node_features.at(i, j));
            out << '\n';
        }
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            out << g.edges[e].src << ',' << g.edges[e].dst;
            for (double f : g.edge_feature(e)) out << ',' << format_real(f);
            out << '\n';
        }
    }
}

void write_graph_csv(const std::filesystem::path& path, const std::vector<GraphSample>& samples) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    write_graph_csv(f, samples);
}

namespace {

struct LineReader {
    std::istream& in;
    const std::string& source;
    std::size_t lineno = 0;

    // Next line that is not a comment; empty string for blank lines.
    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty() && line.front() == '#') continue;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(source + ":" + std::to_string(lineno) + ": " + what);
    }

    std::vector<std::string> fields(const std::string& line) const {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string f = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            while (!f.empty() && f.front() == ' ') f.erase(f.begin());
            while (!f.empty() && f.back() == ' ') f.pop_back();
            out.push_back(std::move(f));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

    double real(const std::string& s, const char* what) const {
        double v = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
            fail(std::string("non-numeric ") + what + " '" + s + "'");
        if (!std::isfinite(v)) fail(std::string("non-finite ") + what + " '" + s + "'");
        return v;
    }

    std::size_t count(const std::string& s, const char* what) const {
        std::size_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
            fail(std::string("expected a non-negative integer for ") + what + ", got '" + s + "'");
        return v;
    }
};

} // namespace

std::vector<GraphSample> read_graph_csv(std::istream& in, const std::string& source) {
    LineReader reader{in, source};
    std::vector<GraphSample> out;
    std::string line;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const std::size_t block_line = reader.lineno;
        auto head = reader.fields(line);
        if (head.size() != 5)
            reader.fail("graph header needs 5 columns (nodes,edges,d_node,d_edge,label), got " +
                        std::to_string(head.size()));
        const std::size_t nodes = reader.count(head[0], "node count");
        const std::size_t edges = reader.count(head[1], "edge count");
        const std::size_t d_node = reader.count(head[2], "d_node");
        const std::size_t d_edge = reader.count(head[3], "d_edge");
        if (nodes == 0) reader.fail("graph with zero nodes");
        if (d_node == 0) reader.fail("d_node must be >= 1");

        GraphSample g;
        g.label = reader.real(head[4], "label");
        g.edge_dim = d_edge;
        g.node_features = Tensor(nodes, d_node);
        for (std::size_t i = 0; i < nodes; ++i) {
            if (!reader.next(line) || line.empty())
                reader.fail("expected node row " + std::to_string(i) + " of " + std::to_string(nodes));
            auto f = reader.fields(line);
            if (f.size() != d_node)
                reader.fail("node row has " + std::to_string(f.size()) + " columns, expected " +
                            std::to_string(d_node));
            for (std::size_t j = 0; j < d_node; ++j) g.node_features.at(i, j) = reader.real(f[j], "node feature");
        }
        for (std::size_t e = 0; e < edges; ++e) {
            if (!reader.next(line) || line.empty())
                reader.fail("expected edge row " + std::to_string(e) + " of " + std::to_string(edges));
            auto f = reader.fields(line);
            if (f.size() != 2 + d_edge)
                reader.fail("edge row has " + std::to_string(f.size()) + " columns, expected " +
                            std::to_string(2 + d_edge));
            const std::size_t u = reader.count(f[0], "edge source");
            const std::size_t v = reader.count(f[1], "edge target");
            if (u >= nodes || v >= nodes)
                reader.fail("edge (" + f[0] + "," + f[1] + ") references a node outside 0.." +
                            std::to_string(nodes - 1));
            if (u == v) reader.fail("self-loop on node " + f[0]);
            g.edges.push_back({u, v});
            for (std::size_t k = 0; k < d_edge; ++k) g.edge_features.push_back(reader.real(f[2 + k], "edge feature"));
        }
        try {
            validate(g);
        } catch (const Error& e) {
            throw ParseError(source + ":" + std::to_string(block_line) + ": " + e.what());
        }
        out.push_back(std::move(g));
    }
    if (out.empty()) throw ParseError(source + ": no samples");
    return out;
}

std::vector<GraphSample> load_graph_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ParseError(path.string() + ": cannot open file");
    return read_graph_csv(f, path.string());
}

DatasetSplit split_dataset(std::size_t n, double train_ratio, double val_ratio, double test_ratio,
                           std::uint64_t seed) {
    for (double r : {train_ratio, val_ratio, test_ratio})
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(n)));
    if (n_train == 0) throw ConfigError("split leaves no training samples");
    DatasetSplit s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    return s;
}

} // namespace samlab
