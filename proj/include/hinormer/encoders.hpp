#pragma once

#include "hinormer/autodiff.hpp"
#include "hinormer/graph.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hinormer {

using ad::Parameter;
using Matrix = Eigen::MatrixXd;

/// Sparse operators derived from a graph, built once and shared by the
/// encoders.
struct GraphOperators {
    std::shared_ptr<const SparseMatrix> sym_norm;           ///< D^-1/2 A D^-1/2
    std::shared_ptr<const SparseMatrix> sym_norm_loops;     ///< same with A + I
    std::shared_ptr<const SparseMatrix> mean;               ///< D^-1 A
    std::shared_ptr<const SparseMatrix> mean_loops;         ///< D^-1 (A + I)
    std::shared_ptr<const SparseMatrix> raw;                ///< A
    std::vector<int> node_type;

    static GraphOperators build(const HeteroGraph& g);
};

// ---------------------------------------------------------------------------
// Heterogeneous feature projection

/// One affine map per node type into the shared width-d space. weight[t] is
/// stored transposed (d_x(t) x d) so that rows project as x W + b. For
/// one-hot identity types weight[t] has one row per member node, which is the
/// only part of the |V|-wide matrix a one-hot input can select.
struct ProjectionParams {
    std::vector<Parameter> weight;
    std::vector<Parameter> bias;

    static ProjectionParams init(const FeatureTable& features, int dim, std::uint64_t seed);
    int dim() const { return bias.empty() ? 0 : static_cast<int>(bias[0].value.cols()); }
};

Matrix project_features(const HeteroGraph& g, const ProjectionParams& p);
ad::Var project_features(ad::Tape& tape, const HeteroGraph& g, ProjectionParams& p);

// ---------------------------------------------------------------------------
// Local structure encoder

enum class StructureKind { AdjPower, Gcn, SampleAggregate, SumMlp };

StructureKind parse_structure_kind(const std::string& s);
const char* to_string(StructureKind k);

struct StructureLayer {
    Parameter weight;       ///< gcn: W; sample-aggregate: W_self; sum-mlp: first MLP layer
    Parameter weight_aux;   ///< sample-aggregate: W_neigh; sum-mlp: second MLP layer
    Parameter bias;
    Parameter bias_aux;     ///< sum-mlp only
};

struct StructureEncoderParams {
    StructureKind kind = StructureKind::AdjPower;
    int layers = 0;         ///< K_s
    bool self_loops = false; ///< adj-power only; gcn always adds loops
    double slope = 0.2;
    std::vector<StructureLayer> weights; ///< empty for adj-power

    static StructureEncoderParams init(StructureKind kind, int layers, int dim, std::uint64_t seed,
                                       bool adj_self_loops = false);
};

/// adj-power: Â^K H by K sparse products. gcn: Â' H W + b per layer with
/// self loops. sample-aggregate: H W_self + mean_N(H) W_neigh + b. sum-mlp:
/// MLP(H + sum_N H). LeakyReLU between layers, none after the last.
Matrix encode_structure(const Matrix& h, const HeteroGraph& g, const StructureEncoderParams& p);
ad::Var encode_structure(const ad::Var& h, const GraphOperators& ops, StructureEncoderParams& p);

// ---------------------------------------------------------------------------
// Heterogeneous relation encoder

enum class RelationMode {
    Normalized, ///< mean over the neighborhood including the node itself
    RawSum      ///< plain sum over neighbors, no self term
};

RelationMode parse_relation_mode(const std::string& s);
const char* to_string(RelationMode m);

struct RelationEncoderParams {
    int steps = 0; ///< K_h
    RelationMode mode = RelationMode::Normalized;
    std::vector<Parameter> type_weight; ///< per step, 1 x |T_v|
    std::vector<Parameter> transform;   ///< per step, |T_v| x |T_v|, f(r) = M r

    static RelationEncoderParams init(int steps, int num_types, std::uint64_t seed,
                                      RelationMode mode = RelationMode::Normalized);
};

/// One-hot type rows of every node (step-0 encoding).
Matrix type_onehot(const HeteroGraph& g);

/// r_v^t = sum_u a(v,u) w^t[type u] M^t r_u^{t-1}, with a the self-inclusive
/// mean operator or the raw adjacency depending on the mode.
Matrix encode_relations(const HeteroGraph& g, const RelationEncoderParams& p);
ad::Var encode_relations(ad::Tape& tape, const GraphOperators& ops, int num_types, RelationEncoderParams& p);

/// Initializes a matrix with entries uniform in ±sqrt(1/fan_in).
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, std::uint64_t seed);

} // namespace hinormer
