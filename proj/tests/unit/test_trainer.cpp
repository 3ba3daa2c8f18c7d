#include "doctest.h"
#include "helpers.hpp"

#include "hinormer/checkpoint.hpp"
#include "hinormer/losses.hpp"
#include "hinormer/metrics.hpp"
#include "hinormer/optim.hpp"
#include "hinormer/synthetic.hpp"
#include "hinormer/trainer.hpp"

#include <cmath>
#include <numbers>

using namespace hinormer;
using testing::random_matrix;
using testing::TempDir;

namespace {

TrainConfig tiny_config()
{
    TrainConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.seq_len = 6;
    cfg.hops = 1;
    cfg.ks = 1;
    cfg.kh = 1;
    cfg.epochs = 5;
    cfg.patience = 5;
    cfg.learning_rate = 1e-2;
    return cfg;
}

Dataset small_synthetic(std::uint64_t seed)
{
    SynthSpec spec;
    spec.num_nodes = 90;
    spec.seed = seed;
    return make_synthetic(spec);
}

/// Copy of `ds` whose first dense feature is replaced by `value`.
Dataset with_first_feature(const Dataset& ds, double value)
{
    const FeatureTable& ft = ds.graph.features();
    std::vector<bool> onehot;
    std::vector<Eigen::MatrixXd> rows;
    for (int t = 0; t < ft.num_types(); ++t) {
        onehot.push_back(ft.is_onehot_identity(t));
        rows.push_back(ft.is_onehot_identity(t) ? Eigen::MatrixXd() : ft.rows(t));
    }
    rows[0](0, 0) = value;
    Dataset out = ds;
    out.graph = HeteroGraph::build(ds.graph.num_nodes(), ds.graph.node_types(), ds.graph.num_node_types(),
                                   ds.graph.num_edge_types(), ds.graph.edges(),
                                   FeatureTable(ds.graph.node_types(), ft.num_types(), onehot, rows));
    return out;
}

double train_loss(HINormerModel& model, const Dataset& ds, const TrainConfig& cfg)
{
    const auto ctx = contexts_for(ds.graph, ds.split.train, cfg);
    std::vector<std::vector<int>> labels;
    for (NodeId v : ds.split.train) labels.push_back(ds.labels.labels[v]);
    ad::Tape tape;
    ForwardContext fc;
    return batch_loss(model.forward(tape, ctx, fc), labels, false, Reduction::Mean).scalar();
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("uniform logits cost ln C")
{
    for (int c : {2, 3, 4, 7}) {
        const Eigen::VectorXd z = Eigen::VectorXd::Constant(c, 0.3);
        for (int label = 0; label < c; ++label)
            CHECK(std::abs(loss_multiclass(z, label) - std::log(static_cast<double>(c))) <= 1e-12);
        const std::vector<int> none;
        CHECK(std::abs(loss_multilabel(Eigen::VectorXd::Zero(c), none) - c * std::numbers::ln2) <= 1e-12);
    }
    CHECK_THROWS_AS(loss_multiclass(Eigen::VectorXd::Zero(3), 3), std::out_of_range);
}

TEST_CASE("batch loss equals the scalar per-node oracle")
{
    const Eigen::MatrixXd pred = random_matrix(5, 4, 1);
    const std::vector<std::vector<int>> single{{0}, {3}, {1}, {1}, {2}};
    const std::vector<std::vector<int>> multi{{0, 2}, {}, {1, 2, 3}, {3}, {0}};
    double ce = 0.0, bce = 0.0;
    for (int i = 0; i < 5; ++i) {
        // Hand-written per-row terms.
        double lse = 0.0;
        for (int c = 0; c < 4; ++c) lse += std::exp(pred(i, c));
        ce += std::log(lse) - pred(i, single[i][0]);
        for (int c = 0; c < 4; ++c) {
            const double y = std::find(multi[i].begin(), multi[i].end(), c) != multi[i].end() ? 1.0 : 0.0;
            const double p = 1.0 / (1.0 + std::exp(-pred(i, c)));
            bce -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    }
    ad::Tape tape;
    const ad::Var z = tape.constant(pred);
    CHECK(std::abs(batch_loss(z, single, false, Reduction::Sum).scalar() - ce) <= 1e-12);
    CHECK(std::abs(batch_loss(z, single, false, Reduction::Mean).scalar() - ce / 5.0) <= 1e-12);
    CHECK(std::abs(batch_loss(z, multi, true, Reduction::Sum).scalar() - bce) <= 1e-12);
    double scalar_sum = 0.0;
    for (int i = 0; i < 5; ++i) scalar_sum += loss_multiclass(pred.row(i).transpose(), single[i][0]);
    CHECK(std::abs(scalar_sum - ce) <= 1e-12);
}

TEST_CASE("Adam update rules")
{
    SUBCASE("zero gradient leaves parameters unchanged")
    {
        ad::Parameter p("p", random_matrix(3, 3, 1));
        const Eigen::MatrixXd before = p.value;
        p.zero_grad();
        Adam opt;
        std::vector<ad::Parameter*> ps{&p};
        opt.step(ps, 0.1);
        CHECK(p.value == before);
    }
    SUBCASE("first step moves each entry by lr against the gradient sign")
    {
        ad::Parameter p("p", random_matrix(2, 3, 2));
        const Eigen::MatrixXd before = p.value;
        p.grad = random_matrix(2, 3, 3);
        Adam opt;
        std::vector<ad::Parameter*> ps{&p};
        opt.step(ps, 1e-3);
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double g = p.grad.data()[k];
            CHECK(std::abs(p.value.data()[k] - (before.data()[k] - 1e-3 * g / (std::abs(g) + 1e-8))) <= 1e-15);
        }
    }
    SUBCASE("identical gradients give identical updates")
    {
        ad::Parameter a("a", Eigen::MatrixXd::Zero(2, 2)), b("b", Eigen::MatrixXd::Zero(2, 2));
        const Eigen::MatrixXd g = random_matrix(2, 2, 4);
        Adam opt;
        std::vector<ad::Parameter*> ps{&a, &b};
        for (int k = 0; k < 5; ++k) {
            a.grad = g * (k + 1);
            b.grad = g * (k + 1);
            opt.step(ps, 1e-2);
        }
        CHECK(a.value == b.value);
        CHECK(opt.state().step == 5);
    }
    SUBCASE("parameter order is checked")
    {
        ad::Parameter a("a", Eigen::MatrixXd::Zero(1, 1)), b("b", Eigen::MatrixXd::Zero(1, 1));
        a.zero_grad();
        b.zero_grad();
        Adam opt;
        std::vector<ad::Parameter*> ab{&a, &b}, ba{&b, &a};
        opt.step(ab, 0.1);
        CHECK_THROWS(opt.step(ba, 0.1));
    }
}

TEST_CASE("plateau scheduler halves at epoch 12 on a flat tail")
{
    PlateauScheduler s(1e-3, 0.5, 10, 1e-6);
    std::vector<double> lr;
    for (int epoch = 1; epoch <= 24; ++epoch) lr.push_back(s.step(epoch == 1 ? 1.0 : 0.9));
    for (int epoch = 1; epoch <= 11; ++epoch) CHECK(lr[epoch - 1] == 1e-3);
    CHECK(lr[11] == 5e-4);
    CHECK(lr[20] == 5e-4);
    CHECK(lr[21] == 2.5e-4);

    PlateauScheduler improving(1e-3);
    for (int k = 0; k < 100; ++k) CHECK(improving.step(1.0 - 0.001 * k) == 1e-3);

    PlateauScheduler floor(1e-5, 0.5, 1, 1e-6);
    for (int k = 0; k < 20; ++k) floor.step(1.0);
    CHECK(floor.lr() == 1e-6);
}

TEST_CASE("early stopping fires after patience epochs without improvement")
{
    EarlyStopping stop(5);
    int stopped_at = 0;
    for (int epoch = 1; epoch <= 20 && !stopped_at; ++epoch)
        if (stop.step(1.0)) stopped_at = epoch;
    CHECK(stopped_at == 6);

    EarlyStopping improving(3);
    for (int k = 0; k < 50; ++k) CHECK_FALSE(improving.step(1.0 / (k + 1)));
}

TEST_CASE("F1 hand cases")
{
    const std::vector<int> truth{0, 1, 2, 1, 0};
    const F1Scores perfect = f1_multiclass(truth, truth, 3);
    CHECK(perfect.micro == 1.0);
    CHECK(perfect.macro == 1.0);

    const F1Scores skew = f1_multiclass({0, 0, 1, 1}, {0, 0, 0, 0}, 2);
    CHECK(skew.micro == 0.5);
    CHECK(skew.macro == 1.0 / 3.0);

    CHECK_THROWS_AS(f1_multiclass({}, {}, 2), std::invalid_argument);
    CHECK_THROWS_AS(f1_multiclass({0}, {2}, 2), std::out_of_range);
}

TEST_CASE("F1 matches frozen reference values")
{
    // Reference values computed once with scikit-learn 1.7.2 (f1_score,
    // average = micro / macro) and frozen here.
    const std::vector<int> t1{3, 2, 2, 3, 2, 3, 3, 0, 0, 1, 1, 3, 3, 0, 1, 3, 0, 3, 0, 1};
    const std::vector<int> p1{3, 1, 1, 1, 2, 1, 3, 1, 1, 2, 2, 2, 2, 3, 3, 3, 2, 2, 1, 3};
    const F1Scores a = f1_multiclass(t1, p1, 4);
    CHECK(std::abs(a.micro - 0.2) <= 1e-12);
    CHECK(std::abs(a.macro - 0.15714285714285714) <= 1e-12);

    // Class 3 never predicted and class 4 absent everywhere.
    const std::vector<int> t2{1, 0, 3, 0, 3, 2, 0, 0, 1, 0, 0, 2, 3, 1, 3, 3, 3, 2, 1, 2};
    const std::vector<int> p2{0, 1, 1, 0, 2, 0, 0, 0, 2, 2, 2, 0, 2, 1, 1, 0, 1, 2, 1, 0};
    const F1Scores b = f1_multiclass(t2, p2, 5);
    CHECK(std::abs(b.micro - 0.3) <= 1e-12);
    CHECK(std::abs(b.macro - 0.2571428571428571) <= 1e-12);

    const std::vector<std::vector<int>> tm{{0, 2}, {0, 2}, {0, 1, 2}, {0, 2}, {}, {0, 1, 2}, {0, 1, 2},
                                           {1, 2}, {2},    {1},       {},     {0}, {0, 1},    {0, 2},
                                           {1, 2}, {0, 1}, {0},       {},     {0}, {0, 1}};
    const std::vector<std::vector<int>> pm{{1},    {2},    {1, 2}, {1, 2}, {1, 2},    {0, 1, 2}, {2},
                                           {1, 2}, {1},    {2},    {0, 1, 2}, {0},    {0},       {1},
                                           {0, 1, 2}, {1, 2}, {},  {0},    {0, 2},    {1}};
    const F1Scores c = f1_multilabel(tm, pm, 3);
    CHECK(std::abs(c.micro - 0.5396825396825397) <= 1e-12);
    CHECK(std::abs(c.macro - 0.5359307359307359) <= 1e-12);
}

TEST_CASE("training with zero epochs keeps the initial parameters")
{
    const Dataset ds = make_fixture();
    TrainConfig cfg = tiny_config();
    cfg.epochs = 0;
    const TrainResult r = train(ds, cfg);
    CHECK(r.history.empty());
    CHECK(r.best_epoch == 0);
    HINormerModel fresh(cfg.model_config(3), ds.graph, cfg.seed);
    const auto init = snapshot(fresh);
    REQUIRE(init.size() == r.checkpoint.params.size());
    for (std::size_t k = 0; k < init.size(); ++k) CHECK(init[k].value == r.checkpoint.params[k].value);
    const Metrics m = evaluate(fresh, ds, SplitPart::Test, cfg);
    CHECK(m.micro_f1 == r.test.micro_f1);
    CHECK(m.loss == r.test.loss);
}

TEST_CASE("training is deterministic down to the bytes")
{
    const Dataset ds = small_synthetic(1);
    TrainConfig cfg = tiny_config();
    cfg.batch_size = 16;
    cfg.sampler = SamplingPolicy::SeededRandom;
    TempDir dir;
    const TrainResult a = train(ds, cfg), b = train(ds, cfg);
    CHECK(metrics_jsonl(a.history) == metrics_jsonl(b.history));
    write_checkpoint(dir / "a.bin", a.checkpoint);
    write_checkpoint(dir / "b.bin", b.checkpoint);
    CHECK(testing::read_file(dir / "a.bin") == testing::read_file(dir / "b.bin"));

    cfg.seed = 2;
    const TrainResult c = train(ds, cfg);
    CHECK(metrics_jsonl(a.history) != metrics_jsonl(c.history));
}

TEST_CASE("one step at the default learning rate lowers the training loss")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = small_synthetic(seed);
        TrainConfig cfg = tiny_config();
        cfg.dim = 16;
        cfg.learning_rate = 1e-4;
        cfg.dropout = 0.0;
        cfg.seed = seed;
        HINormerModel model(cfg.model_config(ds.labels.num_classes), ds.graph, seed);
        const double before = train_loss(model, ds, cfg);

        const auto ctx = contexts_for(ds.graph, ds.split.train, cfg);
        std::vector<std::vector<int>> labels;
        for (NodeId v : ds.split.train) labels.push_back(ds.labels.labels[v]);
        const auto params = model.parameters();
        for (Parameter* p : params) p->zero_grad();
        ad::Tape tape;
        ForwardContext fc;
        tape.backward(batch_loss(model.forward(tape, ctx, fc), labels, false, Reduction::Mean));
        Adam opt;
        opt.step(params, cfg.learning_rate);

        CHECK(train_loss(model, ds, cfg) < before);
    }
}

TEST_CASE("training restores the best epoch and records the history")
{
    const Dataset ds = small_synthetic(3);
    TrainConfig cfg = tiny_config();
    cfg.epochs = 30;
    cfg.patience = 4;
    cfg.learning_rate = 0.5;
    int calls = 0;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord&) { ++calls; };
    const TrainResult r = train(ds, cfg, hooks);
    CHECK(calls == static_cast<int>(r.history.size()));
    REQUIRE(r.best_epoch >= 1);
    double best = r.history.front().val_loss;
    for (const EpochRecord& e : r.history) best = std::min(best, e.val_loss);
    CHECK(r.history[r.best_epoch - 1].val_loss == best);
    CHECK(std::abs(r.val.loss - best) <= 1e-12);
    if (r.stopped_early) CHECK(static_cast<int>(r.history.size()) == r.best_epoch + cfg.patience);
}

TEST_CASE("training rejects inconsistent inputs")
{
    Dataset ds = make_fixture();
    TrainConfig cfg = tiny_config();
    cfg.multilabel = true;
    CHECK_THROWS_AS(train(ds, cfg), ConfigError);
    cfg.multilabel = false;
    ds.split.val.clear();
    CHECK_THROWS_AS(train(ds, cfg), std::invalid_argument);
    HINormerModel model(cfg.model_config(3), ds.graph, 0);
    CHECK_THROWS_AS(evaluate(model, ds, SplitPart::Val, cfg), std::invalid_argument);
}

TEST_CASE("a non-finite loss raises DivergenceError")
{
    const Dataset ds = with_first_feature(make_fixture(), std::numeric_limits<double>::quiet_NaN());
    TrainConfig cfg = tiny_config();
    cfg.no_lse = true;
    CHECK_THROWS_AS(train(ds, cfg), DivergenceError);
}

TEST_CASE("multi-label training runs end to end")
{
    Dataset ds = make_fixture();
    ds.labels.multilabel = true;
    ds.info.multilabel = true;
    ds.labels.labels[0] = {0, 2};
    ds.labels.labels[2] = {1, 2};
    TrainConfig cfg = tiny_config();
    cfg.multilabel = true;
    const TrainResult r = train(ds, cfg);
    CHECK(r.history.size() == 5);
    CHECK(std::isfinite(r.test.loss));
    CHECK(r.test.micro_f1 >= 0.0);
    CHECK(r.test.micro_f1 <= 1.0);
}

TEST_CASE("checkpoint round trip and corruption")
{
    const Dataset ds = make_fixture();
    TrainConfig cfg = tiny_config();
    const TrainResult r = train(ds, cfg);
    TempDir dir;
    write_checkpoint(dir / "ck.bin", r.checkpoint);
    const Checkpoint back = read_checkpoint(dir / "ck.bin");
    CHECK(back.config_text == r.checkpoint.config_text);
    CHECK(back.dataset_checksum == ds.checksum());
    CHECK(back.epoch == r.checkpoint.epoch);
    CHECK(back.best_epoch == r.checkpoint.best_epoch);
    CHECK(back.adam.step == r.checkpoint.adam.step);
    REQUIRE(back.params.size() == r.checkpoint.params.size());
    for (std::size_t k = 0; k < back.params.size(); ++k) {
        CHECK(back.params[k].name == r.checkpoint.params[k].name);
        CHECK(back.params[k].value == r.checkpoint.params[k].value);
    }
    write_checkpoint(dir / "again.bin", back);
    CHECK(testing::read_file(dir / "again.bin") == testing::read_file(dir / "ck.bin"));

    // Restored parameters reproduce the trained model's predictions.
    HINormerModel model(cfg.model_config(3), ds.graph, cfg.seed);
    restore(model, back.params);
    CHECK(evaluate(model, ds, SplitPart::Test, cfg).loss == r.test.loss);

    std::string bytes = testing::read_file(dir / "ck.bin");
    testing::write_file(dir / "bad.bin", "XXXXXXXX" + bytes.substr(8));
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.bin"), std::runtime_error);
    testing::write_file(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(dir / "short.bin"), std::runtime_error);

    std::vector<NamedTensor> wrong = back.params;
    wrong[0].value = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(restore(model, wrong), std::runtime_error);
}

TEST_CASE("synthetic generator")
{
    const Dataset a = small_synthetic(7), b = small_synthetic(7), c = small_synthetic(8);
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != c.checksum());
    for (NodeId v : a.split.train) {
        CHECK(a.graph.node_type(v) == 0);
        CHECK(a.labels.labels[v][0] == dominant_neighbor_type(a.graph, v));
        std::vector<int> hist(3, 0);
        for (const Arc& arc : a.graph.neighbors(v)) ++hist[a.graph.node_type(arc.node)];
        std::sort(hist.rbegin(), hist.rend());
        CHECK(hist[0] - hist[1] >= 2);
    }
    CHECK(a.split.train.size() + a.split.val.size() + a.split.test.size() == 60);
    CHECK(a.split.train.size() == 36);

    SynthSpec four;
    four.num_types = 4;
    four.num_nodes = 300;
    const Dataset d = make_synthetic(four);
    CHECK(d.labels.num_classes == 4);
    CHECK(d.graph.num_edge_types() == 10);

    SynthSpec bad;
    bad.num_types = 1;
    CHECK_THROWS_AS(make_synthetic(bad), std::invalid_argument);
}

}
