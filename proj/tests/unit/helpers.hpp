#pragma once

#include "hinormer/dataset.hpp"
#include "hinormer/graph.hpp"
#include "hinormer/random.hpp"

#include <Eigen/Core>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <queue>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

namespace testing {

using hinormer::Edge;
using hinormer::HeteroGraph;
using hinormer::NodeId;
using Matrix = Eigen::MatrixXd;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0)
{
    hinormer::Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = scale * rng.normal();
    return m;
}

/// Dense features of width `dim` on every type.
inline hinormer::FeatureTable dense_features(const std::vector<int>& type, int num_types, int dim, std::uint64_t seed)
{
    std::vector<int> count(num_types, 0);
    for (int t : type) ++count[t];
    std::vector<Eigen::MatrixXd> rows(num_types);
    for (int t = 0; t < num_types; ++t) rows[t] = random_matrix(count[t], dim, seed + static_cast<std::uint64_t>(t));
    return hinormer::FeatureTable(type, num_types, std::vector<bool>(num_types, false), std::move(rows));
}

inline HeteroGraph make_graph(const std::vector<int>& type, int num_types,
                              const std::vector<std::pair<NodeId, NodeId>>& pairs, int dim = 2, std::uint64_t seed = 1)
{
    std::vector<Edge> edges;
    for (auto [u, v] : pairs) edges.push_back({u, v, 0});
    return HeteroGraph::build(static_cast<int>(type.size()), type, num_types, 1, std::move(edges),
                              dense_features(type, num_types, dim, seed));
}

/// Erdos-Renyi-style graph: each unordered pair is joined with probability p.
inline HeteroGraph random_graph(int n, int num_types, double p, std::uint64_t seed, int dim = 3)
{
    hinormer::Rng rng(seed);
    std::vector<int> type(n);
    for (int v = 0; v < n; ++v) type[v] = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_types)));
    std::vector<std::pair<NodeId, NodeId>> pairs;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.uniform() < p) pairs.emplace_back(u, v);
    return make_graph(type, num_types, pairs, dim, seed);
}

inline std::vector<std::pair<NodeId, NodeId>> path_pairs(int n)
{
    std::vector<std::pair<NodeId, NodeId>> pairs;
    for (int v = 0; v + 1 < n; ++v) pairs.emplace_back(v, v + 1);
    return pairs;
}

/// Symmetric arc-count matrix built directly from the edge list.
inline Matrix dense_adjacency(const HeteroGraph& g)
{
    Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
    for (const Edge& e : g.edges()) {
        a(e.src, e.dst) += 1.0;
        if (e.src != e.dst) a(e.dst, e.src) += 1.0;
    }
    return a;
}

inline Matrix dense_sym_norm(const HeteroGraph& g)
{
    const Matrix a = dense_adjacency(g);
    const Eigen::VectorXd deg = a.rowwise().sum();
    Matrix out = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) out(i, j) = a(i, j) / std::sqrt(deg(i) * deg(j));
    return out;
}

/// BFS distances, -1 when unreachable.
inline std::vector<int> bfs_distance(const HeteroGraph& g, NodeId src)
{
    const Matrix a = dense_adjacency(g);
    std::vector<int> dist(g.num_nodes(), -1);
    std::queue<NodeId> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
        const NodeId u = q.front();
        q.pop();
        for (NodeId v = 0; v < g.num_nodes(); ++v)
            if (a(u, v) != 0.0 && dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
    }
    return dist;
}

class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hinormer-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing
