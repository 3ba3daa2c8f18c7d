// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion. Exit status is nonzero if any criterion fails.

#include "helpers.hpp"
#include "oracles.hpp"

#include "hinormer/checkpoint.hpp"
#include "hinormer/dataset.hpp"
#include "hinormer/encoders.hpp"
#include "hinormer/losses.hpp"
#include "hinormer/metrics.hpp"
#include "hinormer/synthetic.hpp"
#include "hinormer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace hinormer;
using testing::random_matrix;

namespace {

// Tolerances and budgets.
constexpr double kGradStep = 1e-5;
constexpr double kGradRel = 1e-4;
constexpr double kGradAbs = 1e-7;
constexpr double kGradSeconds = 60.0;
constexpr double kStructureTol = 1e-9;
constexpr double kLogitTol = 1e-10;
constexpr double kBiasTol = 1e-12;
constexpr double kPermutationTol = 1e-9;
constexpr int kPermutations = 100;
constexpr double kBetaTol = 1e-12;
constexpr double kSynthTarget = 0.95;
constexpr int kSynthSeeds = 5;
constexpr int kSynthRequired = 4;
constexpr double kSynthSeconds = 300.0;
constexpr double kLossTol = 1e-12;

struct Outcome {
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// 1 -------------------------------------------------------------------------

Outcome gradient_fidelity()
{
    TrainConfig cfg;
    cfg.seq_len = 6;
    cfg.layers = 2;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.ks = 2;
    cfg.kh = 2;
    cfg.dropout = 0.0;
    GradCheckOptions opt;
    opt.step = kGradStep;
    opt.rel_tolerance = kGradRel;
    opt.abs_tolerance = kGradAbs;
    const auto t0 = Clock::now();
    const GradCheckReport r = model_grad_check(make_fixture(), cfg, opt);
    const double secs = seconds_since(t0);
    double worst = 0.0;
    Eigen::Index entries = 0, failures = 0;
    for (const auto& e : r.entries) {
        worst = std::max(worst, e.max_abs_error);
        entries += e.size;
        failures += e.failures;
    }
    Outcome o;
    o.pass = r.passed && secs <= kGradSeconds;
    o.detail = std::to_string(r.entries.size()) + " tensors, " + std::to_string(entries) + " entries, " +
               std::to_string(failures) + " failures, " + fmt("max abs err %.2e, %.2f s", worst, secs);
    return o;
}

// 2 -------------------------------------------------------------------------

Outcome oracle_equivalence()
{
    double structure = 0.0, logits = 0.0, bias = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const int n = 5 + static_cast<int>(seed) * 5;
        const HeteroGraph g = testing::random_graph(n, 3, 0.15, seed);
        const Matrix h = random_matrix(n, 6, seed + 100);
        const Matrix a = testing::dense_sym_norm(g);
        for (int k = 0; k <= 3; ++k) {
            Matrix expect = h;
            for (int i = 0; i < k; ++i) expect = a * expect;
            const Matrix got = encode_structure(h, g, StructureEncoderParams::init(StructureKind::AdjPower, k, 6, 0));
            structure = std::max(structure, (got - expect).cwiseAbs().maxCoeff());
        }
    }
    for (Mechanism m : {Mechanism::GATv2, Mechanism::GAT, Mechanism::DotProduct})
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            AttentionConfig cfg;
            cfg.mechanism = m;
            cfg.dim = 8;
            cfg.heads = 2;
            cfg.num_types = 3;
            LayerParams p = LayerParams::init(cfg, 0, seed);
            std::uint64_t k = 1000 * (seed + 1);
            p.for_each([&](Parameter& x) { x.value = random_matrix(x.value.rows(), x.value.cols(), ++k, 0.5); });
            const Matrix hs = random_matrix(6, 8, seed + 200);
            const Matrix rs = random_matrix(6, 3, seed + 300);
            const std::vector<std::uint8_t> mask(6, 1);
            const AttentionMap base = attention_logits(hs, mask, cfg, p);
            const AttentionMap biased = add_relational_bias(base, rs, p, 0.8);
            for (int head = 0; head < cfg.heads; ++head)
                for (int i = 0; i < 6; ++i)
                    for (int j = 0; j < 6; ++j) {
                        logits = std::max(logits, std::abs(base.logits[head](i, j) -
                                                           oracle::logit(hs, i, j, cfg, p.heads[head])));
                        const double expect = base.logits[head](i, j) + 0.8 * oracle::relational(rs, i, j, p.heads[head]);
                        bias = std::max(bias, std::abs(biased.logits[head](i, j) - expect));
                    }
        }
    Outcome o;
    o.pass = structure <= kStructureTol && logits <= kLogitTol && bias <= kBiasTol;
    o.detail = fmt("structure %.1e, logits %.1e, bias %.1e", structure, logits, bias);
    return o;
}

// 3 -------------------------------------------------------------------------

Outcome permutation_invariance()
{
    const Dataset ds = make_synthetic(SynthSpec{});
    TrainConfig cfg;
    cfg.dim = 32;
    cfg.seq_len = 20;
    cfg.hops = 2;
    HINormerModel model(cfg.model_config(ds.labels.num_classes), ds.graph, 7);
    ad::Tape tape;
    ForwardContext fc;
    const auto enc = model.encode(tape, fc);
    const Matrix features = enc.features.value();
    const Matrix relations = enc.relations.value();

    double worst = 0.0;
    Rng rng(11);
    const auto contexts = contexts_for(ds.graph, ds.split.test, cfg);
    for (int trial = 0; trial < kPermutations; ++trial) {
        const ContextSequence& seq = contexts[static_cast<std::size_t>(trial) % contexts.size()];
        const auto S = static_cast<Eigen::Index>(seq.nodes.size());
        Matrix h = Matrix::Zero(S, features.cols()), r = Matrix::Zero(S, relations.cols());
        for (Eigen::Index i = 0; i < S; ++i)
            if (seq.nodes[i] >= 0) {
                h.row(i) = features.row(seq.nodes[i]);
                r.row(i) = relations.row(seq.nodes[i]);
            }
        std::vector<int> perm(static_cast<std::size_t>(S) - 1);
        std::iota(perm.begin(), perm.end(), 1);
        rng.shuffle(perm);
        perm.insert(perm.begin(), 0);
        Matrix hp(S, h.cols()), rp(S, r.cols());
        std::vector<std::uint8_t> mp(static_cast<std::size_t>(S));
        ContextSequence permuted = seq;
        for (Eigen::Index i = 0; i < S; ++i) {
            hp.row(i) = h.row(perm[i]);
            rp.row(i) = r.row(perm[i]);
            mp[i] = seq.mask[perm[i]];
            permuted.nodes[i] = seq.nodes[perm[i]];
        }
        const auto& att = model.config().attention;
        const Eigen::RowVectorXd a = readout(stack_forward(h, r, seq.mask, att, model.layers()), seq);
        const Eigen::RowVectorXd b = readout(stack_forward(hp, rp, mp, att, model.layers()), permuted);
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    Outcome o;
    o.pass = worst <= kPermutationTol;
    o.detail = std::to_string(kPermutations) + fmt(" permutations, max deviation %.1e", worst);
    return o;
}

// 4 -------------------------------------------------------------------------

Outcome beta_zero()
{
    const Dataset ds = make_synthetic(SynthSpec{});
    TrainConfig with;
    with.dim = 16;
    with.beta = 0.0;
    with.epochs = 5;
    with.patience = 5;
    with.batch_size = 32;
    with.learning_rate = 1e-3;
    with.seed = 3;
    TrainConfig without = with;
    without.use_relational_bias = false;

    HINormerModel a(with.model_config(ds.labels.num_classes), ds.graph, with.seed);
    HINormerModel b(without.model_config(ds.labels.num_classes), ds.graph, without.seed);
    const auto contexts = contexts_for(ds.graph, ds.split.train, with);
    double worst = 0.0;
    for (std::size_t start = 0; start < contexts.size(); start += 32) {
        const std::span<const ContextSequence> batch(contexts.data() + start, std::min<std::size_t>(32, contexts.size() - start));
        ad::Tape ta, tb;
        ForwardContext fa, fb;
        worst = std::max(worst, (a.forward(ta, batch, fa).value() - b.forward(tb, batch, fb).value()).cwiseAbs().maxCoeff());
    }

    // The equivalence also holds through training.
    const TrainResult ra = train(ds, with), rb = train(ds, without);
    for (std::size_t e = 0; e < ra.history.size(); ++e)
        worst = std::max({worst, std::abs(ra.history[e].train_loss - rb.history[e].train_loss),
                          std::abs(ra.history[e].val_loss - rb.history[e].val_loss)});
    Outcome o;
    o.pass = worst <= kBetaTol && ra.history.size() == rb.history.size();
    o.detail = fmt("max deviation %.1e over batches and %g training epochs", worst, static_cast<double>(ra.history.size()));
    return o;
}

// 5 -------------------------------------------------------------------------

TrainConfig synthetic_config(std::uint64_t seed)
{
    TrainConfig cfg;
    cfg.dim = 32;
    cfg.hops = 1;
    cfg.kh = 1;
    cfg.ks = 1;
    cfg.structure_encoder = StructureKind::SampleAggregate;
    cfg.learning_rate = 5e-3;
    cfg.epochs = 200;
    cfg.seed = seed;
    return cfg;
}

Outcome synthetic_classification()
{
    const auto t0 = Clock::now();
    int hits = 0;
    double full_mean = 0.0, ablated_mean = 0.0;
    std::ostringstream scores;
    for (int s = 0; s < kSynthSeeds; ++s) {
        SynthSpec spec;
        spec.seed = static_cast<std::uint64_t>(s);
        const Dataset ds = make_synthetic(spec);
        TrainConfig cfg = synthetic_config(spec.seed);
        const double full = train(ds, cfg).test.micro_f1;
        cfg.no_lse = true;
        const double ablated = train(ds, cfg).test.micro_f1;
        hits += full >= kSynthTarget;
        full_mean += full / kSynthSeeds;
        ablated_mean += ablated / kSynthSeeds;
        scores << (s ? " " : "") << fmt("%.3f", full);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = hits >= kSynthRequired && full_mean >= ablated_mean && secs <= kSynthSeconds;
    o.detail = "full [" + scores.str() + "] " + std::to_string(hits) + "/" + std::to_string(kSynthSeeds) +
               fmt(" >= 0.95, mean %.3f vs no-LSE %.3f, %.0f s (both variants)", full_mean, ablated_mean, secs);
    return o;
}

// 6 -------------------------------------------------------------------------

Outcome loss_metric_sanity()
{
    double worst = 0.0;
    for (int c = 2; c <= 10; ++c)
        for (int label = 0; label < c; ++label)
            worst = std::max(worst, std::abs(loss_multiclass(Eigen::VectorXd::Zero(c), label) - std::log(double(c))));
    const F1Scores perfect = f1_multiclass({0, 1, 2, 2, 1}, {0, 1, 2, 2, 1}, 3);
    const F1Scores skew = f1_multiclass({0, 0, 1, 1}, {0, 0, 0, 0}, 2);
    Outcome o;
    o.pass = worst <= kLossTol && perfect.micro == 1.0 && perfect.macro == 1.0 && skew.micro == 0.5 &&
             skew.macro == 1.0 / 3.0;
    o.detail = fmt("ln C error %.1e, all-correct %.3f/%.3f, ", worst, perfect.micro, perfect.macro) +
               fmt("skewed case micro %.17g macro %.17g", skew.micro, skew.macro);
    return o;
}

// 7 -------------------------------------------------------------------------

Outcome dblp_counts()
{
    Outcome o;
    const char* dir = std::getenv("HINORMER_DBLP_DIR");
    if (!dir || !*dir) {
        o.pass = true;
        o.skipped = true;
        o.detail = "HINORMER_DBLP_DIR not set";
        return o;
    }
    try {
        const Dataset ds = load_dataset(dir);
        const HeteroGraph& g = ds.graph;
        o.pass = g.num_nodes() == 26128 && g.num_edges() == 239566 && g.num_node_types() == 4 &&
                 ds.labels.num_classes == 4;
        o.detail = std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) + " edges, " +
                   std::to_string(g.num_node_types()) + " node types, " + std::to_string(ds.labels.num_classes) +
                   " classes";
    } catch (const std::exception& e) {
        o.detail = e.what();
    }
    return o;
}

// 8 -------------------------------------------------------------------------

Outcome determinism()
{
    SynthSpec spec;
    spec.seed = 9;
    const Dataset ds = make_synthetic(spec);
    TrainConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 8;
    cfg.patience = 8;
    cfg.batch_size = 50;
    cfg.learning_rate = 1e-3;
    cfg.sampler = SamplingPolicy::SeededRandom;
    cfg.seed = 4;
    testing::TempDir dir;
    const TrainResult a = train(ds, cfg), b = train(ds, cfg);
    write_checkpoint(dir / "a.bin", a.checkpoint);
    write_checkpoint(dir / "b.bin", b.checkpoint);
    const std::string ha = metrics_jsonl(a.history), hb = metrics_jsonl(b.history);
    const std::string ca = testing::read_file(dir / "a.bin"), cb = testing::read_file(dir / "b.bin");
    Outcome o;
    o.pass = !ha.empty() && ha == hb && !ca.empty() && ca == cb;
    o.detail = std::to_string(ha.size()) + " history bytes, " + std::to_string(ca.size()) + " checkpoint bytes, " +
               (ha == hb ? "history identical" : "history differs") + ", " +
               (ca == cb ? "checkpoint identical" : "checkpoint differs");
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"1 gradient fidelity", gradient_fidelity},
        {"2 oracle equivalence", oracle_equivalence},
        {"3 context-permutation invariance", permutation_invariance},
        {"4 beta = 0 reduction", beta_zero},
        {"5 synthetic classification", synthetic_classification},
        {"6 loss/metric sanity", loss_metric_sanity},
        {"7 DBLP data check", dblp_counts},
        {"8 determinism", determinism},
    };
    bool all = true;
    for (const Criterion& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.detail = std::string("exception: ") + e.what();
        }
        all = all && o.pass;
        std::cout << (o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << o.detail << ")"
                  << std::endl;
    }
    return all ? 0 : 1;
}
