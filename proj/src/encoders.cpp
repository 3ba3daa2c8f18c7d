#include "hinormer/encoders.hpp"

#include "hinormer/random.hpp"

#include <cmath>
#include <stdexcept>

namespace hinormer {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in, std::uint64_t seed)
{
    Rng rng(seed);
    const double bound = std::sqrt(1.0 / std::max(fan_in, 1.0));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

namespace {

Parameter make_param(const std::string& name, Matrix value) { return Parameter(name, std::move(value)); }

Parameter init_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fan_in, std::uint64_t seed)
{
    return make_param(name, uniform_init(rows, cols, fan_in, mix_seed(seed, hash_string(name))));
}

} // namespace

GraphOperators GraphOperators::build(const HeteroGraph& g)
{
    GraphOperators ops;
    ops.sym_norm = build_normalized_adjacency(g, false).matrix;
    ops.sym_norm_loops = build_normalized_adjacency(g, true).matrix;
    ops.mean = build_mean_adjacency(g, false);
    ops.mean_loops = build_mean_adjacency(g, true);
    ops.raw = build_adjacency(g, false);
    ops.node_type = g.node_types();
    return ops;
}

// ---------------------------------------------------------------------------

ProjectionParams ProjectionParams::init(const FeatureTable& features, int dim, std::uint64_t seed)
{
    if (dim < 1) throw std::invalid_argument("projection: dim must be positive");
    ProjectionParams p;
    for (int t = 0; t < features.num_types(); ++t) {
        const std::string base = "proj." + std::to_string(t);
        const double fan_in = features.dim(t);
        const Eigen::Index rows =
            features.is_onehot_identity(t) ? static_cast<Eigen::Index>(features.members(t).size()) : features.dim(t);
        p.weight.push_back(init_param(base + ".weight", rows, dim, fan_in, seed));
        p.bias.push_back(init_param(base + ".bias", 1, dim, fan_in, seed));
    }
    return p;
}

ad::Var project_features(ad::Tape& tape, const HeteroGraph& g, ProjectionParams& p)
{
    const FeatureTable& ft = g.features();
    if (static_cast<int>(p.weight.size()) != ft.num_types())
        throw std::invalid_argument("project_features: parameters for " + std::to_string(p.weight.size()) +
                                    " types, graph has " + std::to_string(ft.num_types()));
    std::vector<ad::Var> parts;
    std::vector<std::vector<int>> rows;
    for (int t = 0; t < ft.num_types(); ++t) {
        if (ft.members(t).empty()) continue;
        ad::Var w = tape.param(p.weight[t]);
        ad::Var b = tape.param(p.bias[t]);
        ad::Var y;
        if (ft.is_onehot_identity(t)) {
            if (w.rows() != static_cast<Eigen::Index>(ft.members(t).size()))
                throw std::invalid_argument("project_features: type " + std::to_string(t) + " embedding has " +
                                            std::to_string(w.rows()) + " rows for " +
                                            std::to_string(ft.members(t).size()) + " nodes");
            y = ad::add_row(w, b);
        } else {
            if (w.rows() != ft.dim(t))
                throw std::invalid_argument("project_features: type " + std::to_string(t) + " expects feature width " +
                                            std::to_string(w.rows()) + ", data has " + std::to_string(ft.dim(t)));
            y = ad::add_row(ad::matmul(tape.constant(ft.rows(t)), w), b);
        }
        parts.push_back(y);
        rows.push_back(ft.members(t));
    }
    if (parts.empty()) throw std::invalid_argument("project_features: empty graph");
    return ad::assemble_rows(parts, std::move(rows), g.num_nodes());
}

Matrix project_features(const HeteroGraph& g, const ProjectionParams& p)
{
    ProjectionParams copy = p;
    ad::Tape tape;
    return project_features(tape, g, copy).value();
}

// ---------------------------------------------------------------------------

StructureKind parse_structure_kind(const std::string& s)
{
    if (s == "adj-power" || s == "adj") return StructureKind::AdjPower;
    if (s == "gcn") return StructureKind::Gcn;
    if (s == "sample-aggregate" || s == "sage") return StructureKind::SampleAggregate;
    if (s == "sum-mlp" || s == "gin") return StructureKind::SumMlp;
    throw std::invalid_argument("unknown structure encoder '" + s + "'");
}

const char* to_string(StructureKind k)
{
    switch (k) {
    case StructureKind::AdjPower: return "adj-power";
    case StructureKind::Gcn: return "gcn";
    case StructureKind::SampleAggregate: return "sample-aggregate";
    case StructureKind::SumMlp: return "sum-mlp";
    }
    return "?";
}

StructureEncoderParams StructureEncoderParams::init(StructureKind kind, int layers, int dim, std::uint64_t seed,
                                                    bool adj_self_loops)
{
    if (layers < 0) throw std::invalid_argument("structure encoder: K_s must be >= 0");
    StructureEncoderParams p;
    p.kind = kind;
    p.layers = layers;
    p.self_loops = adj_self_loops;
    if (kind == StructureKind::AdjPower) return p;
    for (int l = 0; l < layers; ++l) {
        const std::string base = "lse." + std::to_string(l);
        StructureLayer layer;
        layer.weight = init_param(base + ".weight", dim, dim, dim, seed);
        layer.bias = init_param(base + ".bias", 1, dim, dim, seed);
        if (kind == StructureKind::SampleAggregate || kind == StructureKind::SumMlp)
            layer.weight_aux = init_param(base + ".weight_aux", dim, dim, dim, seed);
        if (kind == StructureKind::SumMlp) layer.bias_aux = init_param(base + ".bias_aux", 1, dim, dim, seed);
        p.weights.push_back(std::move(layer));
    }
    return p;
}

ad::Var encode_structure(const ad::Var& h, const GraphOperators& ops, StructureEncoderParams& p)
{
    if (p.layers < 0) throw std::invalid_argument("encode_structure: K_s must be >= 0");
    ad::Tape& tape = *h.tape();
    ad::Var x = h;
    if (p.kind == StructureKind::AdjPower) {
        const auto& op = p.self_loops ? ops.sym_norm_loops : ops.sym_norm;
        for (int l = 0; l < p.layers; ++l) x = ad::spmm(op, x);
        return x;
    }
    if (static_cast<int>(p.weights.size()) != p.layers)
        throw std::invalid_argument("encode_structure: expected " + std::to_string(p.layers) + " parameter layers");
    for (int l = 0; l < p.layers; ++l) {
        StructureLayer& w = p.weights[l];
        switch (p.kind) {
        case StructureKind::Gcn:
            x = ad::add_row(ad::spmm(ops.sym_norm_loops, ad::matmul(x, tape.param(w.weight))), tape.param(w.bias));
            break;
        case StructureKind::SampleAggregate:
            x = ad::add_row(ad::add(ad::matmul(x, tape.param(w.weight)),
                                    ad::matmul(ad::spmm(ops.mean, x), tape.param(w.weight_aux))),
                            tape.param(w.bias));
            break;
        case StructureKind::SumMlp: {
            ad::Var agg = ad::add(x, ad::spmm(ops.raw, x));
            ad::Var hidden = ad::leaky_relu(ad::add_row(ad::matmul(agg, tape.param(w.weight)), tape.param(w.bias)),
                                            p.slope);
            x = ad::add_row(ad::matmul(hidden, tape.param(w.weight_aux)), tape.param(w.bias_aux));
            break;
        }
        case StructureKind::AdjPower: break;
        }
        if (l + 1 < p.layers) x = ad::leaky_relu(x, p.slope);
    }
    return x;
}

Matrix encode_structure(const Matrix& h, const HeteroGraph& g, const StructureEncoderParams& p)
{
    if (h.rows() != g.num_nodes())
        throw std::invalid_argument("encode_structure: " + std::to_string(h.rows()) + " rows for " +
                                    std::to_string(g.num_nodes()) + " nodes");
    StructureEncoderParams copy = p;
    const GraphOperators ops = GraphOperators::build(g);
    ad::Tape tape;
    return encode_structure(tape.constant(h), ops, copy).value();
}

// ---------------------------------------------------------------------------

RelationMode parse_relation_mode(const std::string& s)
{
    if (s == "normalized") return RelationMode::Normalized;
    if (s == "raw" || s == "raw-sum") return RelationMode::RawSum;
    throw std::invalid_argument("unknown relation mode '" + s + "'");
}

const char* to_string(RelationMode m) { return m == RelationMode::Normalized ? "normalized" : "raw"; }

RelationEncoderParams RelationEncoderParams::init(int steps, int num_types, std::uint64_t seed, RelationMode mode)
{
    if (steps < 0) throw std::invalid_argument("relation encoder: K_h must be >= 0");
    RelationEncoderParams p;
    p.steps = steps;
    p.mode = mode;
    for (int s = 0; s < steps; ++s) {
        const std::string base = "hre." + std::to_string(s);
        p.type_weight.push_back(make_param(base + ".type_weight", Matrix::Ones(1, num_types)));
        Matrix noise = uniform_init(num_types, num_types, 1.0, mix_seed(seed, hash_string(base + ".transform"))) * 0.01;
        p.transform.push_back(make_param(base + ".transform", Matrix::Identity(num_types, num_types) + noise));
    }
    return p;
}

Matrix type_onehot(const HeteroGraph& g)
{
    Matrix r = Matrix::Zero(g.num_nodes(), g.num_node_types());
    for (NodeId v = 0; v < g.num_nodes(); ++v) r(v, g.node_type(v)) = 1.0;
    return r;
}

ad::Var encode_relations(ad::Tape& tape, const GraphOperators& ops, int num_types, RelationEncoderParams& p)
{
    if (static_cast<int>(p.type_weight.size()) != p.steps || static_cast<int>(p.transform.size()) != p.steps)
        throw std::invalid_argument("encode_relations: parameter count differs from K_h");
    const auto n = static_cast<Eigen::Index>(ops.node_type.size());
    Matrix onehot = Matrix::Zero(n, num_types);
    for (Eigen::Index v = 0; v < n; ++v) onehot(v, ops.node_type[static_cast<std::size_t>(v)]) = 1.0;
    ad::Var r = tape.constant(std::move(onehot));
    const auto& op = p.mode == RelationMode::Normalized ? ops.mean_loops : ops.raw;
    for (int s = 0; s < p.steps; ++s) {
        ad::Var f = ad::matmul(r, ad::transpose(tape.param(p.transform[s])));
        ad::Var weighted = ad::scale_rows_by_group(f, tape.param(p.type_weight[s]), ops.node_type);
        r = ad::spmm(op, weighted);
    }
    return r;
}

Matrix encode_relations(const HeteroGraph& g, const RelationEncoderParams& p)
{
    RelationEncoderParams copy = p;
    const GraphOperators ops = GraphOperators::build(g);
    ad::Tape tape;
    return encode_relations(tape, ops, g.num_node_types(), copy).value();
}

} // namespace hinormer
