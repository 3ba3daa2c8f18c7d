#pragma once

#include "hinormer/context.hpp"
#include "hinormer/encoders.hpp"
#include "hinormer/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hinormer {

struct ModelConfig {
    AttentionConfig attention;
    int layers = 2;
    StructureKind lse_kind = StructureKind::AdjPower;
    int ks = 3;
    bool lse_self_loops = false;
    int kh = 3;
    RelationMode relation_mode = RelationMode::Normalized;
    bool no_lse = false;
    bool no_hre = false;
    /// Relation encoder parameters and relational projections stay at init.
    bool freeze_relational = false;
    int num_classes = 2;
    double feature_dropout = 0.0;
    double attention_dropout = 0.0;

    void validate() const;
};

/// Linear layer followed by row-wise L2 normalization.
struct PredictionHead {
    Parameter weight; ///< d x C
    Parameter bias;   ///< 1 x C
};

/// Normalized class scores for one representation. A zero linear output is
/// returned as zeros and reported on std::clog.
Eigen::VectorXd predict(const Eigen::VectorXd& h, const PredictionHead& head);
ad::Var predict(const ad::Var& h, PredictionHead& head);

/// Encoder stack plus Transformer layers over sampled contexts. Holds a
/// reference to the graph, which must outlive the model.
class HINormerModel {
public:
    HINormerModel(const ModelConfig& cfg, const HeteroGraph& g, std::uint64_t seed);

    struct Encoded {
        ad::Var features;  ///< N x d structure-enhanced features
        ad::Var relations; ///< N x |T_v| relational encodings; unbound when disabled
    };

    Encoded encode(ad::Tape& tape, ForwardContext& ctx);

    /// Representations (B x d) of each sequence's target.
    ad::Var represent(const Encoded& enc, std::span<const ContextSequence> batch, ForwardContext& ctx,
                      std::vector<std::vector<std::vector<Matrix>>>* attention = nullptr);

    /// Normalized class scores (B x C).
    ad::Var forward(ad::Tape& tape, std::span<const ContextSequence> batch, ForwardContext& ctx,
                    std::vector<std::vector<std::vector<Matrix>>>* attention = nullptr);

    /// Every parameter in a fixed order.
    std::vector<Parameter*> parameters();
    Parameter* find(const std::string& name);

    const ModelConfig& config() const { return cfg_; }
    const HeteroGraph& graph() const { return *graph_; }

    ProjectionParams& projection() { return projection_; }
    StructureEncoderParams& structure() { return structure_; }
    RelationEncoderParams& relation() { return relation_; }
    std::vector<LayerParams>& layers() { return layers_; }
    PredictionHead& head() { return head_; }

private:
    ModelConfig cfg_;
    const HeteroGraph* graph_;
    GraphOperators ops_;
    ProjectionParams projection_;
    StructureEncoderParams structure_;
    RelationEncoderParams relation_;
    std::vector<LayerParams> layers_;
    PredictionHead head_;
};

} // namespace hinormer
