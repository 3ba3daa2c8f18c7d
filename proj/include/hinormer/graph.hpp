#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hinormer {

using NodeId = int;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Raised for malformed or inconsistent dataset content.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    int type = 0;

    bool operator==(const Edge&) const = default;
};

/// One stored directed arc of the symmetrized adjacency.
struct Arc {
    NodeId node = 0;
    int edge_type = 0;
    int edge_id = 0;

    bool operator==(const Arc&) const = default;
};

/// Node features grouped by node type. A type is either dense (every node of
/// that type carries a row of width per_type_dim[t]) or one-hot identity
/// (width |V|, never materialized).
class FeatureTable {
public:
    FeatureTable() = default;

    /// `dense_rows[t]` holds rows for the members of type t in ascending node
    /// order, or is empty with `onehot[t]` set.
    FeatureTable(std::span<const int> node_type, int num_node_types, std::vector<bool> onehot,
                 std::vector<Eigen::MatrixXd> dense_rows);

    int num_types() const { return static_cast<int>(onehot_.size()); }
    int dim(int type) const { return per_type_dim_[type]; }
    const std::vector<int>& per_type_dim() const { return per_type_dim_; }
    bool is_onehot_identity(int type) const { return onehot_[type]; }
    /// Dense rows of a featured type, members in ascending id order.
    const Eigen::MatrixXd& rows(int type) const { return dense_[type]; }
    /// Position of node v within its type's member list.
    int local_index(NodeId v) const { return local_index_[v]; }
    const std::vector<NodeId>& members(int type) const { return members_[type]; }

    /// Materializes x_v, of length dim(type of v).
    Eigen::VectorXd row(NodeId v) const;

    bool operator==(const FeatureTable& other) const;

private:
    std::vector<int> per_type_dim_;
    std::vector<bool> onehot_;
    std::vector<Eigen::MatrixXd> dense_;
    std::vector<int> local_index_;
    std::vector<int> node_type_;
    std::vector<std::vector<NodeId>> members_;
};

/// Typed undirected multigraph with CSR adjacency. Immutable after build().
class HeteroGraph {
public:
    HeteroGraph() = default;

    /// Validates ids and types and builds the symmetric CSR. Each input edge
    /// is stored as two arcs (u->v and v->u).
    static HeteroGraph build(int num_nodes, std::vector<int> node_type, int num_node_types, int num_edge_types,
                             std::vector<Edge> edges, FeatureTable features);

    int num_nodes() const { return num_nodes_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_node_types() const { return num_node_types_; }
    int num_edge_types() const { return num_edge_types_; }
    int node_type(NodeId v) const { return node_type_[v]; }
    const std::vector<int>& node_types() const { return node_type_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const FeatureTable& features() const { return features_; }

    const std::vector<int>& csr_offsets() const { return offsets_; }
    const std::vector<Arc>& csr_arcs() const { return arcs_; }

    /// Arcs leaving v, sorted by (neighbor, edge type, edge id).
    std::span<const Arc> neighbors(NodeId v) const;
    int degree(NodeId v) const;

    /// Content hash over types, edges and features.
    std::uint64_t checksum() const;

    bool operator==(const HeteroGraph&) const = default;

private:
    int num_nodes_ = 0;
    int num_node_types_ = 0;
    int num_edge_types_ = 0;
    std::vector<int> node_type_;
    std::vector<Edge> edges_;
    std::vector<int> offsets_{0};
    std::vector<Arc> arcs_;
    FeatureTable features_;
};

struct NormalizedAdjacency {
    std::shared_ptr<const SparseMatrix> matrix;
    bool self_loops_added = false;
};

/// D^{-1/2} A D^{-1/2}, with A optionally including self loops. Parallel arcs
/// add up in A.
NormalizedAdjacency build_normalized_adjacency(const HeteroGraph& g, bool self_loops);

/// D^{-1} A: each row averages over the neighborhood. Isolated rows are zero.
std::shared_ptr<const SparseMatrix> build_mean_adjacency(const HeteroGraph& g, bool self_loops);

/// Raw A (arc counts), optionally plus I.
std::shared_ptr<const SparseMatrix> build_adjacency(const HeteroGraph& g, bool self_loops);

} // namespace hinormer
