#pragma once

#include "hinormer/autodiff.hpp"
#include "hinormer/context.hpp"
#include "hinormer/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hinormer {

using ad::Parameter;
using Matrix = Eigen::MatrixXd;

enum class Mechanism { GATv2, DotProduct, GAT };

Mechanism parse_mechanism(const std::string& s);
const char* to_string(Mechanism m);

struct AttentionConfig {
    Mechanism mechanism = Mechanism::GATv2;
    int heads = 2;
    int dim = 256;
    int num_types = 1;          ///< |T_v|, width of relational encodings
    double beta = 1.0;
    bool use_relational_bias = true;
    bool use_ffn = false;       ///< dot-product baseline only
    double slope = 0.2;
    double ln_eps = 1e-5;

    void validate() const;
    int head_dim() const { return dim / heads; }
};

/// Parameters of one attention head. Feature matrices act on rows
/// (x -> x W), relational matrices keep the q = W r orientation.
///   gatv2: left/right are the two halves of W applied to [h_i || h_j],
///          score is a (1 x d_h).
///   gat:   left is W, score is a (1 x 2 d_h) over [W h_i || W h_j].
///   dot:   left is W_Q, right is W_K.
struct HeadParams {
    Parameter left;
    Parameter right;
    Parameter score;
    Parameter value;
    Parameter rel_query;
    Parameter rel_key;
};

struct LayerParams {
    std::vector<HeadParams> heads;
    Parameter merge;     ///< d x d, applied to the concatenated heads
    Parameter ln_scale;
    Parameter ln_shift;
    Parameter ffn_in;    ///< present iff use_ffn
    Parameter ffn_in_bias;
    Parameter ffn_out;
    Parameter ffn_out_bias;
    Parameter ln2_scale;
    Parameter ln2_shift;

    static LayerParams init(const AttentionConfig& cfg, int layer, std::uint64_t seed);

    /// Visits every allocated parameter in a fixed order.
    template <typename F>
    void for_each(F&& f)
    {
        for (HeadParams& h : heads)
            for (Parameter* p : {&h.left, &h.right, &h.score, &h.value, &h.rel_query, &h.rel_key})
                if (p->size() > 0) f(*p);
        for (Parameter* p : {&merge, &ln_scale, &ln_shift, &ffn_in, &ffn_in_bias, &ffn_out, &ffn_out_bias, &ln2_scale,
                             &ln2_shift})
            if (p->size() > 0) f(*p);
    }
};

/// Dropout and mode flags threaded through a forward pass.
struct ForwardContext {
    bool training = false;
    double attention_dropout = 0.0;
    Rng* rng = nullptr;
};

/// Per-head pre-softmax logits with masked key columns at -inf, and the
/// masked-softmax weights derived from them.
struct AttentionMap {
    std::vector<Matrix> logits;
    std::vector<Matrix> weights;
    std::vector<std::uint8_t> mask;
};

AttentionMap attention_logits(const Matrix& hseq, Mask mask, const AttentionConfig& cfg, const LayerParams& params);

/// Adds beta * (W_QR r_i) . (W_KR r_j) to every head's logits and recomputes
/// the weights.
AttentionMap add_relational_bias(const AttentionMap& map, const Matrix& rseq, const LayerParams& params, double beta);

/// LN(H + merge(concat_h softmax(logits_h + bias_h) H W_V,h)); with use_ffn
/// the dot-product baseline adds the FFN sublayer and a second LN.
/// `rseq` may be empty when relational bias is disabled.
Matrix layer_forward(const Matrix& hseq, const Matrix& rseq, Mask mask, const AttentionConfig& cfg,
                     const LayerParams& params);
Matrix stack_forward(const Matrix& hseq, const Matrix& rseq, Mask mask, const AttentionConfig& cfg,
                     const std::vector<LayerParams>& params);

/// Target representation: row 0 of the final layer output.
Eigen::RowVectorXd readout(const Matrix& hout, const ContextSequence& seq);

// Tape-level forms used for training.

/// Raw logits of each head, without mask or relational bias.
std::vector<ad::Var> head_logits(const ad::Var& hseq, const AttentionConfig& cfg, LayerParams& params);
/// S x S relational term (W_QR r_i) . (W_KR r_j) of one head.
ad::Var relational_bias(const ad::Var& rseq, HeadParams& head);
/// `rseq` may be an unbound Var when no relational encodings are used.
/// `weights_out`, when given, receives each head's attention weights.
ad::Var layer_forward(const ad::Var& hseq, const ad::Var& rseq, const std::vector<std::uint8_t>& mask,
                      const AttentionConfig& cfg, LayerParams& params, ForwardContext& ctx,
                      std::vector<Matrix>* weights_out = nullptr);
ad::Var stack_forward(const ad::Var& hseq, const ad::Var& rseq, const std::vector<std::uint8_t>& mask,
                      const AttentionConfig& cfg, std::vector<LayerParams>& params, ForwardContext& ctx,
                      std::vector<std::vector<Matrix>>* weights_out = nullptr);

} // namespace hinormer
