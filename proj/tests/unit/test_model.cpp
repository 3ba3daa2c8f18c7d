#include "doctest.h"
#include "helpers.hpp"

#include "hinormer/config.hpp"
#include "hinormer/model.hpp"
#include "hinormer/synthetic.hpp"
#include "hinormer/trainer.hpp"

#include <set>

using namespace hinormer;
using testing::random_matrix;

namespace {

PredictionHead identity_head(int d)
{
    PredictionHead h;
    h.weight = Parameter("head.weight", Matrix::Identity(d, d));
    h.bias = Parameter("head.bias", Matrix::Zero(1, d));
    return h;
}

TrainConfig small_config()
{
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.seq_len = 6;
    cfg.ks = 2;
    cfg.kh = 2;
    cfg.dropout = 0.0;
    return cfg;
}

Matrix outputs(HINormerModel& model, const std::vector<ContextSequence>& ctx)
{
    ad::Tape tape;
    ForwardContext fc;
    return model.forward(tape, ctx, fc).value();
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("prediction head normalizes its output")
{
    const PredictionHead head = identity_head(2);
    const Eigen::VectorXd y = predict(Eigen::Vector2d(3, 4), head);
    CHECK(y(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(y(1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(predict(Eigen::Vector2d::Zero(), head).norm() == 0.0);
}

TEST_CASE("prediction norm and scale invariance")
{
    PredictionHead head;
    head.weight = Parameter("w", random_matrix(6, 4, 1));
    head.bias = Parameter("b", Matrix::Zero(1, 4));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Eigen::VectorXd h = random_matrix(6, 1, seed + 10);
        const Eigen::VectorXd y = predict(h, head);
        CHECK(std::abs(y.norm() - 1.0) <= 1e-12);
        CHECK((predict((3.5 * h).eval(), head) - y).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("forward yields one unit-norm row per target")
{
    const Dataset ds = make_fixture();
    const TrainConfig cfg = small_config();
    HINormerModel model(cfg.model_config(3), ds.graph, 1);
    const auto ctx = contexts_for(ds.graph, ds.split.train, cfg);
    const Matrix y = outputs(model, ctx);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == 3);
    for (Eigen::Index i = 0; i < y.rows(); ++i) CHECK(std::abs(y.row(i).norm() - 1.0) <= 1e-12);
    ad::Tape tape;
    ForwardContext fc;
    CHECK_THROWS_AS(model.forward(tape, std::span<const ContextSequence>(), fc), std::invalid_argument);
}

TEST_CASE("parameter names are unique and seed-determined")
{
    const Dataset ds = make_fixture();
    const TrainConfig cfg = small_config();
    HINormerModel a(cfg.model_config(3), ds.graph, 5), b(cfg.model_config(3), ds.graph, 5),
        c(cfg.model_config(3), ds.graph, 6);
    std::set<std::string> names;
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    bool any_diff = false;
    for (std::size_t k = 0; k < pa.size(); ++k) {
        CHECK(names.insert(pa[k]->name).second);
        CHECK(pa[k]->value == pb[k]->value);
        any_diff = any_diff || pa[k]->value != pc[k]->value;
    }
    CHECK(any_diff);
    CHECK(a.find("head.weight") == pa[pa.size() - 2]);
    CHECK(a.find("no.such.parameter") == nullptr);
}

TEST_CASE("ablation switches remove the corresponding parameters")
{
    const Dataset ds = make_fixture();
    TrainConfig cfg = small_config();
    cfg.no_hre = true;
    HINormerModel no_hre(cfg.model_config(3), ds.graph, 1);
    for (Parameter* p : no_hre.parameters()) CHECK(p->name.find("rel_") == std::string::npos);

    cfg = small_config();
    cfg.freeze_relational = true;
    HINormerModel frozen(cfg.model_config(3), ds.graph, 1);
    int frozen_count = 0;
    for (Parameter* p : frozen.parameters()) {
        const bool relational = p->name.find("rel_") != std::string::npos || p->name.rfind("hre.", 0) == 0;
        CHECK(p->trainable == !relational);
        frozen_count += relational;
    }
    CHECK(frozen_count > 0);
}

TEST_CASE("beta = 0 reproduces the model without relational bias")
{
    const Dataset ds = make_fixture();
    TrainConfig with = small_config();
    with.beta = 0.0;
    TrainConfig without = with;
    without.use_relational_bias = false;
    HINormerModel a(with.model_config(3), ds.graph, 3), b(without.model_config(3), ds.graph, 3);
    const auto ctx = contexts_for(ds.graph, ds.split.train, with);
    CHECK((outputs(a, ctx) - outputs(b, ctx)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("no_hre matches a zero-beta model with frozen relational parameters")
{
    const Dataset ds = make_fixture();
    TrainConfig off = small_config();
    off.no_hre = true;
    TrainConfig zero = small_config();
    zero.beta = 0.0;
    zero.freeze_relational = true;
    HINormerModel a(off.model_config(3), ds.graph, 4), b(zero.model_config(3), ds.graph, 4);
    const auto ctx = contexts_for(ds.graph, ds.split.train, off);
    CHECK((outputs(a, ctx) - outputs(b, ctx)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("dropout only acts in training mode")
{
    const Dataset ds = make_fixture();
    TrainConfig cfg = small_config();
    cfg.dropout = 0.5;
    HINormerModel model(cfg.model_config(3), ds.graph, 2);
    const auto ctx = contexts_for(ds.graph, ds.split.train, cfg);
    const Matrix eval1 = outputs(model, ctx);
    CHECK(eval1 == outputs(model, ctx));
    Rng rng(1);
    ad::Tape tape;
    ForwardContext fc;
    fc.training = true;
    fc.rng = &rng;
    CHECK(model.forward(tape, ctx, fc).value() != eval1);
}

TEST_CASE("model gradients pass the finite-difference check")
{
    const Dataset ds = make_fixture();
    struct Variant {
        const char* name;
        std::function<void(TrainConfig&)> apply;
    };
    const std::vector<Variant> variants = {
        {"gatv2", [](TrainConfig&) {}},
        {"gat", [](TrainConfig& c) { c.mechanism = Mechanism::GAT; }},
        {"dot+ffn", [](TrainConfig& c) {
             c.mechanism = Mechanism::DotProduct;
             c.use_ffn = true;
         }},
        {"gcn", [](TrainConfig& c) { c.structure_encoder = StructureKind::Gcn; }},
        {"sage", [](TrainConfig& c) { c.structure_encoder = StructureKind::SampleAggregate; }},
        {"gin", [](TrainConfig& c) { c.structure_encoder = StructureKind::SumMlp; }},
        {"raw relations", [](TrainConfig& c) { c.relation_mode = RelationMode::RawSum; }},
        {"sum reduction", [](TrainConfig& c) { c.loss_reduction = Reduction::Sum; }},
        {"no lse, no hre", [](TrainConfig& c) {
             c.no_lse = true;
             c.no_hre = true;
         }},
    };
    for (const Variant& v : variants) {
        CAPTURE(v.name);
        TrainConfig cfg = small_config();
        v.apply(cfg);
        const GradCheckReport report = model_grad_check(ds, cfg);
        CHECK_MESSAGE(report.passed, report.to_string());
    }
}

}
