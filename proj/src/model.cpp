#include "hinormer/model.hpp"

#include "hinormer/random.hpp"

#include <iostream>
#include <stdexcept>

namespace hinormer {

void ModelConfig::validate() const
{
    attention.validate();
    if (layers < 1) throw std::invalid_argument("model: at least one Transformer layer required");
    if (ks < 0 || kh < 0) throw std::invalid_argument("model: K_s and K_h must be >= 0");
    if (num_classes < 1) throw std::invalid_argument("model: num_classes must be positive");
    for (double p : {feature_dropout, attention_dropout})
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("model: dropout must lie in [0, 1)");
}

Eigen::VectorXd predict(const Eigen::VectorXd& h, const PredictionHead& head)
{
    const Eigen::VectorXd y = head.weight.value.transpose() * h + head.bias.value.row(0).transpose();
    const double n = y.norm();
    if (n == 0.0) {
        std::clog << "warning: zero prediction vector, left unnormalized\n";
        return y;
    }
    return y / n;
}

ad::Var predict(const ad::Var& h, PredictionHead& head)
{
    ad::Tape& tape = *h.tape();
    ad::Var y = ad::add_row(ad::matmul(h, tape.param(head.weight)), tape.param(head.bias));
    const Eigen::VectorXd norms = y.value().rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i)
        if (norms(i) == 0.0) std::clog << "warning: zero prediction vector in batch row " << i << '\n';
    return ad::l2_normalize_rows(y);
}

HINormerModel::HINormerModel(const ModelConfig& cfg, const HeteroGraph& g, std::uint64_t seed)
    : cfg_(cfg), graph_(&g), ops_(GraphOperators::build(g))
{
    cfg_.attention.num_types = g.num_node_types();
    if (cfg_.no_hre) cfg_.attention.use_relational_bias = false;
    cfg_.validate();

    const int d = cfg_.attention.dim;
    projection_ = ProjectionParams::init(g.features(), d, seed);
    structure_ = StructureEncoderParams::init(cfg_.lse_kind, cfg_.ks, d, seed, cfg_.lse_self_loops);
    structure_.slope = cfg_.attention.slope;
    relation_ = RelationEncoderParams::init(cfg_.kh, g.num_node_types(), seed, cfg_.relation_mode);
    for (int l = 0; l < cfg_.layers; ++l) layers_.push_back(LayerParams::init(cfg_.attention, l, seed));
    head_.weight = Parameter("head.weight", uniform_init(d, cfg_.num_classes, d, mix_seed(seed, hash_string("head.weight"))));
    head_.bias = Parameter("head.bias", uniform_init(1, cfg_.num_classes, d, mix_seed(seed, hash_string("head.bias"))));

    if (cfg_.freeze_relational) {
        for (Parameter& p : relation_.type_weight) p.trainable = false;
        for (Parameter& p : relation_.transform) p.trainable = false;
        for (LayerParams& layer : layers_)
            for (HeadParams& h : layer.heads) {
                h.rel_query.trainable = false;
                h.rel_key.trainable = false;
            }
    }
}

HINormerModel::Encoded HINormerModel::encode(ad::Tape& tape, ForwardContext& ctx)
{
    Encoded enc;
    ad::Var h = project_features(tape, *graph_, projection_);
    if (ctx.training && cfg_.feature_dropout > 0.0 && ctx.rng) {
        const double keep = 1.0 - cfg_.feature_dropout;
        Matrix m(h.rows(), h.cols());
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
        h = ad::mul_constant(h, std::move(m));
    }
    enc.features = cfg_.no_lse ? h : encode_structure(h, ops_, structure_);
    if (!cfg_.no_hre) enc.relations = encode_relations(tape, ops_, graph_->num_node_types(), relation_);
    return enc;
}

ad::Var HINormerModel::represent(const Encoded& enc, std::span<const ContextSequence> batch, ForwardContext& ctx,
                                 std::vector<std::vector<std::vector<Matrix>>>* attention)
{
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    std::vector<ad::Var> rows;
    rows.reserve(batch.size());
    for (const ContextSequence& seq : batch) {
        ad::Var hseq = ad::gather_rows(enc.features, seq.nodes);
        ad::Var rseq = enc.relations.valid() ? ad::gather_rows(enc.relations, seq.nodes) : ad::Var{};
        std::vector<std::vector<Matrix>>* maps = attention ? &attention->emplace_back() : nullptr;
        ad::Var out = stack_forward(hseq, rseq, seq.mask, cfg_.attention, layers_, ctx, maps);
        rows.push_back(ad::gather_rows(out, {0}));
    }
    return ad::vstack(rows);
}

ad::Var HINormerModel::forward(ad::Tape& tape, std::span<const ContextSequence> batch, ForwardContext& ctx,
                               std::vector<std::vector<std::vector<Matrix>>>* attention)
{
    ctx.attention_dropout = cfg_.attention_dropout;
    const Encoded enc = encode(tape, ctx);
    return predict(represent(enc, batch, ctx, attention), head_);
}

std::vector<Parameter*> HINormerModel::parameters()
{
    std::vector<Parameter*> out;
    for (std::size_t t = 0; t < projection_.weight.size(); ++t) {
        out.push_back(&projection_.weight[t]);
        out.push_back(&projection_.bias[t]);
    }
    for (StructureLayer& l : structure_.weights)
        for (Parameter* p : {&l.weight, &l.weight_aux, &l.bias, &l.bias_aux})
            if (p->size() > 0) out.push_back(p);
    for (int s = 0; s < relation_.steps; ++s) {
        out.push_back(&relation_.type_weight[s]);
        out.push_back(&relation_.transform[s]);
    }
    for (LayerParams& layer : layers_) layer.for_each([&](Parameter& p) { out.push_back(&p); });
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

Parameter* HINormerModel::find(const std::string& name)
{
    for (Parameter* p : parameters())
        if (p->name == name) return p;
    return nullptr;
}

} // namespace hinormer
