#include "hinormer/layers.hpp"

#include "hinormer/encoders.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hinormer {

Mechanism parse_mechanism(const std::string& s)
{
    if (s == "gatv2") return Mechanism::GATv2;
    if (s == "dot" || s == "dot-product") return Mechanism::DotProduct;
    if (s == "gat") return Mechanism::GAT;
    throw std::invalid_argument("unknown attention mechanism '" + s + "'");
}

const char* to_string(Mechanism m)
{
    switch (m) {
    case Mechanism::GATv2: return "gatv2";
    case Mechanism::DotProduct: return "dot";
    case Mechanism::GAT: return "gat";
    }
    return "?";
}

void AttentionConfig::validate() const
{
    if (heads < 1 || dim < 1) throw std::invalid_argument("attention: heads and dim must be positive");
    if (dim % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(dim) + " not divisible by " +
                                    std::to_string(heads) + " heads");
    if (beta < 0.0) throw std::invalid_argument("attention: beta must be >= 0");
    if (use_ffn && mechanism != Mechanism::DotProduct)
        throw std::invalid_argument("attention: the FFN sublayer belongs to the dot-product baseline");
    if (num_types < 1) throw std::invalid_argument("attention: num_types must be positive");
}

namespace {

Parameter init_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fan_in, std::uint64_t seed)
{
    return Parameter(name, uniform_init(rows, cols, fan_in, mix_seed(seed, hash_string(name))));
}

std::vector<std::uint8_t> to_vector(Mask mask) { return {mask.begin(), mask.end()}; }

} // namespace

LayerParams LayerParams::init(const AttentionConfig& cfg, int layer, std::uint64_t seed)
{
    cfg.validate();
    const int d = cfg.dim, dh = cfg.head_dim(), T = cfg.num_types;
    const std::string base = "layer." + std::to_string(layer);
    LayerParams p;
    for (int h = 0; h < cfg.heads; ++h) {
        const std::string hb = base + ".head." + std::to_string(h);
        HeadParams head;
        switch (cfg.mechanism) {
        case Mechanism::GATv2:
            head.left = init_param(hb + ".left", d, dh, 2.0 * d, seed);
            head.right = init_param(hb + ".right", d, dh, 2.0 * d, seed);
            head.score = init_param(hb + ".score", 1, dh, dh, seed);
            break;
        case Mechanism::GAT:
            head.left = init_param(hb + ".left", d, dh, d, seed);
            head.score = init_param(hb + ".score", 1, 2 * dh, 2.0 * dh, seed);
            break;
        case Mechanism::DotProduct:
            head.left = init_param(hb + ".query", d, dh, d, seed);
            head.right = init_param(hb + ".key", d, dh, d, seed);
            break;
        }
        head.value = init_param(hb + ".value", d, dh, d, seed);
        if (cfg.use_relational_bias) {
            head.rel_query = init_param(hb + ".rel_query", T, T, T, seed);
            head.rel_key = init_param(hb + ".rel_key", T, T, T, seed);
        }
        p.heads.push_back(std::move(head));
    }
    p.merge = init_param(base + ".merge", d, d, d, seed);
    p.ln_scale = Parameter(base + ".ln.scale", Matrix::Ones(1, d));
    p.ln_shift = Parameter(base + ".ln.shift", Matrix::Zero(1, d));
    if (cfg.use_ffn) {
        p.ffn_in = init_param(base + ".ffn.in", d, 2 * d, d, seed);
        p.ffn_in_bias = init_param(base + ".ffn.in_bias", 1, 2 * d, d, seed);
        p.ffn_out = init_param(base + ".ffn.out", 2 * d, d, 2.0 * d, seed);
        p.ffn_out_bias = init_param(base + ".ffn.out_bias", 1, d, 2.0 * d, seed);
        p.ln2_scale = Parameter(base + ".ln2.scale", Matrix::Ones(1, d));
        p.ln2_shift = Parameter(base + ".ln2.shift", Matrix::Zero(1, d));
    }
    return p;
}

std::vector<ad::Var> head_logits(const ad::Var& hseq, const AttentionConfig& cfg, LayerParams& params)
{
    cfg.validate();
    if (hseq.cols() != cfg.dim)
        throw std::invalid_argument("attention: input width " + std::to_string(hseq.cols()) + ", expected " +
                                    std::to_string(cfg.dim));
    if (static_cast<int>(params.heads.size()) != cfg.heads)
        throw std::invalid_argument("attention: parameters for " + std::to_string(params.heads.size()) +
                                    " heads, config has " + std::to_string(cfg.heads));
    ad::Tape& tape = *hseq.tape();
    const int dh = cfg.head_dim();
    std::vector<ad::Var> out;
    for (HeadParams& h : params.heads) {
        switch (cfg.mechanism) {
        case Mechanism::GATv2: {
            if (h.right.size() == 0 || h.score.value.cols() != dh)
                throw std::invalid_argument("attention: parameters do not match gatv2");
            ad::Var p = ad::matmul(hseq, tape.param(h.left));
            ad::Var q = ad::matmul(hseq, tape.param(h.right));
            out.push_back(ad::pairwise_leaky_score(p, q, tape.param(h.score), cfg.slope));
            break;
        }
        case Mechanism::GAT: {
            if (h.score.value.cols() != 2 * dh) throw std::invalid_argument("attention: parameters do not match gat");
            ad::Var z = ad::matmul(hseq, tape.param(h.left));
            ad::Var a = tape.param(h.score);
            ad::Var sl = ad::matmul(z, ad::transpose(ad::slice_cols(a, 0, dh)));
            ad::Var sr = ad::matmul(z, ad::transpose(ad::slice_cols(a, dh, dh)));
            out.push_back(ad::leaky_relu(ad::pairwise_sum(sl, sr), cfg.slope));
            break;
        }
        case Mechanism::DotProduct: {
            if (h.right.size() == 0 || h.score.size() != 0)
                throw std::invalid_argument("attention: parameters do not match dot-product");
            ad::Var q = ad::matmul(hseq, tape.param(h.left));
            ad::Var k = ad::matmul(hseq, tape.param(h.right));
            out.push_back(ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh))));
            break;
        }
        }
    }
    return out;
}

ad::Var relational_bias(const ad::Var& rseq, HeadParams& head)
{
    if (head.rel_query.size() == 0) throw std::invalid_argument("relational bias: layer has no relational projections");
    if (rseq.cols() != head.rel_query.value.cols())
        throw std::invalid_argument("relational bias: encoding width " + std::to_string(rseq.cols()) + ", expected " +
                                    std::to_string(head.rel_query.value.cols()));
    ad::Tape& tape = *rseq.tape();
    ad::Var q = ad::matmul(rseq, ad::transpose(tape.param(head.rel_query)));
    ad::Var k = ad::matmul(rseq, ad::transpose(tape.param(head.rel_key)));
    return ad::matmul(q, ad::transpose(k));
}

ad::Var layer_forward(const ad::Var& hseq, const ad::Var& rseq, const std::vector<std::uint8_t>& mask,
                      const AttentionConfig& cfg, LayerParams& params, ForwardContext& ctx,
                      std::vector<Matrix>* weights_out)
{
    if (static_cast<Eigen::Index>(mask.size()) != hseq.rows())
        throw std::invalid_argument("layer_forward: mask length " + std::to_string(mask.size()) + " for " +
                                    std::to_string(hseq.rows()) + " positions");
    ad::Tape& tape = *hseq.tape();
    std::vector<ad::Var> logits = head_logits(hseq, cfg, params);
    const bool biased = cfg.use_relational_bias && rseq.valid();
    std::vector<ad::Var> outs;
    for (std::size_t h = 0; h < logits.size(); ++h) {
        ad::Var l = logits[h];
        if (biased) l = ad::add(l, ad::scale(relational_bias(rseq, params.heads[h]), cfg.beta));
        ad::Var w = ad::masked_softmax(l, mask);
        if (weights_out) weights_out->push_back(w.value());
        if (ctx.training && ctx.attention_dropout > 0.0 && ctx.rng) {
            const double keep = 1.0 - ctx.attention_dropout;
            Matrix m(w.rows(), w.cols());
            for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
            w = ad::mul_constant(w, std::move(m));
        }
        outs.push_back(ad::matmul(w, ad::matmul(hseq, tape.param(params.heads[h].value))));
    }
    ad::Var merged = ad::matmul(ad::hconcat(outs), tape.param(params.merge));
    ad::Var out = ad::layer_norm(ad::add(hseq, merged), tape.param(params.ln_scale), tape.param(params.ln_shift),
                                 cfg.ln_eps);
    if (cfg.use_ffn) {
        ad::Var hidden = ad::leaky_relu(
            ad::add_row(ad::matmul(out, tape.param(params.ffn_in)), tape.param(params.ffn_in_bias)), cfg.slope);
        ad::Var ffn = ad::add_row(ad::matmul(hidden, tape.param(params.ffn_out)), tape.param(params.ffn_out_bias));
        out = ad::layer_norm(ad::add(out, ffn), tape.param(params.ln2_scale), tape.param(params.ln2_shift), cfg.ln_eps);
    }
    return out;
}

ad::Var stack_forward(const ad::Var& hseq, const ad::Var& rseq, const std::vector<std::uint8_t>& mask,
                      const AttentionConfig& cfg, std::vector<LayerParams>& params, ForwardContext& ctx,
                      std::vector<std::vector<Matrix>>* weights_out)
{
    if (params.empty()) throw std::invalid_argument("stack_forward: at least one layer required");
    ad::Var x = hseq;
    for (LayerParams& layer : params) {
        std::vector<Matrix>* w = nullptr;
        if (weights_out) w = &weights_out->emplace_back();
        x = layer_forward(x, rseq, mask, cfg, layer, ctx, w);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Plain-matrix entry points

AttentionMap attention_logits(const Matrix& hseq, Mask mask, const AttentionConfig& cfg, const LayerParams& params)
{
    if (static_cast<Eigen::Index>(mask.size()) != hseq.rows())
        throw std::invalid_argument("attention_logits: mask length mismatch");
    LayerParams p = params;
    ad::Tape tape;
    const auto logits = head_logits(tape.constant(hseq), cfg, p);
    AttentionMap map;
    map.mask = to_vector(mask);
    for (const ad::Var& l : logits) {
        Matrix m = l.value();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!mask[j]) m.col(j).setConstant(-std::numeric_limits<double>::infinity());
        map.weights.push_back(masked_softmax(m, mask));
        map.logits.push_back(std::move(m));
    }
    return map;
}

AttentionMap add_relational_bias(const AttentionMap& map, const Matrix& rseq, const LayerParams& params, double beta)
{
    if (map.logits.size() != params.heads.size())
        throw std::invalid_argument("add_relational_bias: head count mismatch");
    LayerParams p = params;
    ad::Tape tape;
    ad::Var r = tape.constant(rseq);
    AttentionMap out;
    out.mask = map.mask;
    for (std::size_t h = 0; h < map.logits.size(); ++h) {
        const Matrix bias = relational_bias(r, p.heads[h]).value();
        require_same_shape(bias, map.logits[h], "add_relational_bias");
        Matrix l = map.logits[h] + beta * bias;
        for (Eigen::Index j = 0; j < l.cols(); ++j)
            if (!out.mask[j]) l.col(j).setConstant(-std::numeric_limits<double>::infinity());
        out.weights.push_back(masked_softmax(l, Mask(out.mask)));
        out.logits.push_back(std::move(l));
    }
    return out;
}

Matrix layer_forward(const Matrix& hseq, const Matrix& rseq, Mask mask, const AttentionConfig& cfg,
                     const LayerParams& params)
{
    LayerParams p = params;
    ad::Tape tape;
    ForwardContext ctx;
    ad::Var r = rseq.size() > 0 ? tape.constant(rseq) : ad::Var{};
    return layer_forward(tape.constant(hseq), r, to_vector(mask), cfg, p, ctx).value();
}

Matrix stack_forward(const Matrix& hseq, const Matrix& rseq, Mask mask, const AttentionConfig& cfg,
                     const std::vector<LayerParams>& params)
{
    std::vector<LayerParams> p = params;
    ad::Tape tape;
    ForwardContext ctx;
    ad::Var r = rseq.size() > 0 ? tape.constant(rseq) : ad::Var{};
    return stack_forward(tape.constant(hseq), r, to_vector(mask), cfg, p, ctx).value();
}

Eigen::RowVectorXd readout(const Matrix& hout, const ContextSequence& seq)
{
    if (hout.rows() != static_cast<Eigen::Index>(seq.nodes.size()) || hout.rows() == 0)
        throw std::invalid_argument("readout: output has " + std::to_string(hout.rows()) + " rows for a sequence of " +
                                    std::to_string(seq.nodes.size()));
    return hout.row(0);
}

} // namespace hinormer
