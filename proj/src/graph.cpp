#include "hinormer/graph.hpp"

#include "hinormer/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <tuple>

namespace hinormer {

FeatureTable::FeatureTable(std::span<const int> node_type, int num_node_types, std::vector<bool> onehot,
                           std::vector<Eigen::MatrixXd> dense_rows)
    : onehot_(std::move(onehot)), dense_(std::move(dense_rows)), node_type_(node_type.begin(), node_type.end())
{
    if (static_cast<int>(onehot_.size()) != num_node_types || static_cast<int>(dense_.size()) != num_node_types)
        throw DataError("feature table: expected per-type entries for " + std::to_string(num_node_types) + " types");
    const int n = static_cast<int>(node_type_.size());
    members_.assign(num_node_types, {});
    local_index_.assign(n, 0);
    for (int v = 0; v < n; ++v) {
        const int t = node_type_[v];
        if (t < 0 || t >= num_node_types)
            throw DataError("feature table: node " + std::to_string(v) + " has type " + std::to_string(t) +
                            " outside [0, " + std::to_string(num_node_types) + ")");
        local_index_[v] = static_cast<int>(members_[t].size());
        members_[t].push_back(v);
    }
    per_type_dim_.assign(num_node_types, 0);
    for (int t = 0; t < num_node_types; ++t) {
        if (onehot_[t]) {
            per_type_dim_[t] = n;
            dense_[t].resize(0, 0);
            continue;
        }
        if (dense_[t].rows() != static_cast<Eigen::Index>(members_[t].size()))
            throw DataError("feature table: type " + std::to_string(t) + " has " + std::to_string(dense_[t].rows()) +
                            " feature rows for " + std::to_string(members_[t].size()) + " nodes");
        per_type_dim_[t] = static_cast<int>(dense_[t].cols());
    }
}

Eigen::VectorXd FeatureTable::row(NodeId v) const
{
    const int t = node_type_.at(v);
    if (onehot_[t]) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(per_type_dim_[t]);
        e(v) = 1.0;
        return e;
    }
    return dense_[t].row(local_index_[v]).transpose();
}

bool FeatureTable::operator==(const FeatureTable& other) const
{
    if (per_type_dim_ != other.per_type_dim_ || onehot_ != other.onehot_ || node_type_ != other.node_type_)
        return false;
    for (std::size_t t = 0; t < dense_.size(); ++t) {
        const auto& a = dense_[t];
        const auto& b = other.dense_[t];
        if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
    }
    return true;
}

HeteroGraph HeteroGraph::build(int num_nodes, std::vector<int> node_type, int num_node_types, int num_edge_types,
                               std::vector<Edge> edges, FeatureTable features)
{
    if (num_nodes < 0 || static_cast<int>(node_type.size()) != num_nodes)
        throw DataError("graph: node type list has " + std::to_string(node_type.size()) + " entries for " +
                        std::to_string(num_nodes) + " nodes");
    if (num_node_types < 1 || num_edge_types < 0) throw DataError("graph: invalid type counts");
    for (int v = 0; v < num_nodes; ++v)
        if (node_type[v] < 0 || node_type[v] >= num_node_types)
            throw DataError("graph: node " + std::to_string(v) + " has type " + std::to_string(node_type[v]) +
                            " outside [0, " + std::to_string(num_node_types) + ")");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& ed = edges[e];
        for (NodeId end : {ed.src, ed.dst})
            if (end < 0 || end >= num_nodes)
                throw DataError("graph: edge " + std::to_string(e) + " references node " + std::to_string(end) +
                                " outside [0, " + std::to_string(num_nodes) + ")");
        if (ed.type < 0 || ed.type >= num_edge_types)
            throw DataError("graph: edge " + std::to_string(e) + " has type " + std::to_string(ed.type) +
                            " outside [0, " + std::to_string(num_edge_types) + ")");
    }
    if (features.num_types() != num_node_types) throw DataError("graph: feature table type count mismatch");

    HeteroGraph g;
    g.num_nodes_ = num_nodes;
    g.num_node_types_ = num_node_types;
    g.num_edge_types_ = num_edge_types;
    g.node_type_ = std::move(node_type);
    g.edges_ = std::move(edges);
    g.features_ = std::move(features);

    std::vector<int> count(num_nodes + 1, 0);
    for (const Edge& e : g.edges_) {
        ++count[e.src + 1];
        ++count[e.dst + 1];
    }
    for (int v = 0; v < num_nodes; ++v) count[v + 1] += count[v];
    g.offsets_ = count;
    g.arcs_.resize(static_cast<std::size_t>(count[num_nodes]));
    std::vector<int> fill(count.begin(), count.end() - 1);
    for (std::size_t e = 0; e < g.edges_.size(); ++e) {
        const Edge& ed = g.edges_[e];
        const int id = static_cast<int>(e);
        g.arcs_[fill[ed.src]++] = Arc{ed.dst, ed.type, id};
        g.arcs_[fill[ed.dst]++] = Arc{ed.src, ed.type, id};
    }
    for (int v = 0; v < num_nodes; ++v)
        std::sort(g.arcs_.begin() + g.offsets_[v], g.arcs_.begin() + g.offsets_[v + 1], [](const Arc& a, const Arc& b) {
            return std::tie(a.node, a.edge_type, a.edge_id) < std::tie(b.node, b.edge_type, b.edge_id);
        });
    return g;
}

std::span<const Arc> HeteroGraph::neighbors(NodeId v) const
{
    if (v < 0 || v >= num_nodes_)
        throw std::out_of_range("neighbors: node " + std::to_string(v) + " outside [0, " + std::to_string(num_nodes_) +
                                ")");
    return std::span<const Arc>(arcs_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

int HeteroGraph::degree(NodeId v) const { return static_cast<int>(neighbors(v).size()); }

std::uint64_t HeteroGraph::checksum() const
{
    std::uint64_t h = mix_seed(static_cast<std::uint64_t>(num_nodes_), static_cast<std::uint64_t>(num_node_types_),
                               static_cast<std::uint64_t>(num_edge_types_));
    for (int t : node_type_) h = mix_seed(h, static_cast<std::uint64_t>(t));
    for (const Edge& e : edges_)
        h = mix_seed(h, static_cast<std::uint64_t>(e.src), mix_seed(static_cast<std::uint64_t>(e.dst),
                                                                    static_cast<std::uint64_t>(e.type)));
    for (int t = 0; t < features_.num_types(); ++t) {
        h = mix_seed(h, features_.is_onehot_identity(t) ? 1u : 0u, static_cast<std::uint64_t>(features_.dim(t)));
        const auto& m = features_.rows(t);
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            std::uint64_t bits = 0;
            const double x = m.data()[k];
            std::memcpy(&bits, &x, sizeof bits);
            h = mix_seed(h, bits);
        }
    }
    return h;
}

std::shared_ptr<const SparseMatrix> build_adjacency(const HeteroGraph& g, bool self_loops)
{
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.csr_arcs().size() + (self_loops ? g.num_nodes() : 0));
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        for (const Arc& a : g.neighbors(v)) triplets.emplace_back(v, a.node, 1.0);
        if (self_loops) triplets.emplace_back(v, v, 1.0);
    }
    auto a = std::make_shared<SparseMatrix>(g.num_nodes(), g.num_nodes());
    a->setFromTriplets(triplets.begin(), triplets.end());
    return a;
}

NormalizedAdjacency build_normalized_adjacency(const HeteroGraph& g, bool self_loops)
{
    auto a = std::const_pointer_cast<SparseMatrix>(build_adjacency(g, self_loops));
    Eigen::VectorXd inv_sqrt(g.num_nodes());
    for (Eigen::Index v = 0; v < a->outerSize(); ++v) {
        double d = 0.0;
        for (SparseMatrix::InnerIterator it(*a, v); it; ++it) d += it.value();
        inv_sqrt(v) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    for (Eigen::Index v = 0; v < a->outerSize(); ++v)
        for (SparseMatrix::InnerIterator it(*a, v); it; ++it) it.valueRef() *= inv_sqrt(v) * inv_sqrt(it.col());
    return NormalizedAdjacency{std::move(a), self_loops};
}

std::shared_ptr<const SparseMatrix> build_mean_adjacency(const HeteroGraph& g, bool self_loops)
{
    auto a = std::const_pointer_cast<SparseMatrix>(build_adjacency(g, self_loops));
    for (Eigen::Index v = 0; v < a->outerSize(); ++v) {
        double d = 0.0;
        for (SparseMatrix::InnerIterator it(*a, v); it; ++it) d += it.value();
        if (d == 0.0) continue;
        for (SparseMatrix::InnerIterator it(*a, v); it; ++it) it.valueRef() /= d;
    }
    return a;
}

} // namespace hinormer
