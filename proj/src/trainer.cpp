#include "hinormer/trainer.hpp"

#include "hinormer/random.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace hinormer {

namespace {

constexpr std::size_t kEvalChunk = 256;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::vector<int>> labels_of(const Dataset& ds, std::span<const NodeId> ids)
{
    std::vector<std::vector<int>> out;
    out.reserve(ids.size());
    for (NodeId v : ids) out.push_back(ds.labels.labels.at(static_cast<std::size_t>(v)));
    return out;
}

} // namespace

std::string metrics_jsonl(const std::vector<EpochRecord>& history)
{
    std::string out;
    for (const EpochRecord& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = r.train_loss;
        j["val_loss"] = r.val_loss;
        j["val_micro_f1"] = r.val_micro_f1;
        j["val_macro_f1"] = r.val_macro_f1;
        j["lr"] = r.lr;
        out += j.dump() + "\n";
    }
    return out;
}

std::string timings_jsonl(const std::vector<EpochRecord>& history)
{
    std::string out;
    for (const EpochRecord& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["seconds"] = r.seconds;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<ContextSequence> contexts_for(const HeteroGraph& g, std::span<const NodeId> ids, const TrainConfig& cfg,
                                          std::uint64_t salt)
{
    SamplerConfig sc;
    sc.hops = cfg.hops;
    sc.seq_len = cfg.seq_len;
    sc.policy = cfg.sampler;
    sc.seed = salt == 0 ? cfg.seed : mix_seed(cfg.seed, salt);
    return sample_all(g, ids, sc);
}

Eigen::MatrixXd predict_scores(HINormerModel& model, std::span<const ContextSequence> contexts)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(contexts.size()), model.config().num_classes);
    for (std::size_t start = 0; start < contexts.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, contexts.size() - start);
        ad::Tape tape;
        ForwardContext ctx;
        ad::Var pred = model.forward(tape, contexts.subspan(start, n), ctx);
        out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = pred.value();
    }
    return out;
}

namespace {

Metrics score(const Eigen::MatrixXd& pred, const std::vector<std::vector<int>>& truth, const LabelSet& labels)
{
    Metrics m;
    double loss = 0.0;
    if (labels.multilabel) {
        std::vector<std::vector<int>> guess(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const Eigen::VectorXd row = pred.row(static_cast<Eigen::Index>(i)).transpose();
            loss += loss_multilabel(row, truth[i]);
            for (Eigen::Index c = 0; c < row.size(); ++c)
                if (row(c) > 0.0) guess[i].push_back(static_cast<int>(c));
        }
        const F1Scores f = f1_multilabel(truth, guess, labels.num_classes);
        m.micro_f1 = f.micro;
        m.macro_f1 = f.macro;
    } else {
        std::vector<int> t, guess;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const Eigen::VectorXd row = pred.row(static_cast<Eigen::Index>(i)).transpose();
            loss += loss_multiclass(row, truth[i].front());
            Eigen::Index best = 0;
            row.maxCoeff(&best);
            t.push_back(truth[i].front());
            guess.push_back(static_cast<int>(best));
        }
        const F1Scores f = f1_multiclass(t, guess, labels.num_classes);
        m.micro_f1 = f.micro;
        m.macro_f1 = f.macro;
    }
    m.loss = loss / static_cast<double>(truth.size());
    return m;
}

Metrics evaluate_contexts(HINormerModel& model, const Dataset& ds, std::span<const NodeId> ids,
                          std::span<const ContextSequence> contexts)
{
    if (ids.empty()) throw std::invalid_argument("evaluate: empty split");
    const auto t0 = Clock::now();
    Metrics m = score(predict_scores(model, contexts), labels_of(ds, ids), ds.labels);
    m.seconds = seconds_since(t0);
    return m;
}

} // namespace

Metrics evaluate(HINormerModel& model, const Dataset& ds, SplitPart part, const TrainConfig& cfg)
{
    const std::vector<NodeId>& ids = ds.split.part(part);
    if (ids.empty()) throw std::invalid_argument(std::string("evaluate: empty ") + to_string(part) + " split");
    const auto contexts = contexts_for(ds.graph, ids, cfg);
    return evaluate_contexts(model, ds, ids, contexts);
}

std::vector<NamedTensor> snapshot(HINormerModel& model)
{
    std::vector<NamedTensor> out;
    for (Parameter* p : model.parameters()) out.push_back({p->name, p->value});
    return out;
}

void restore(HINormerModel& model, const std::vector<NamedTensor>& params)
{
    for (Parameter* p : model.parameters()) {
        const auto it =
            std::find_if(params.begin(), params.end(), [&](const NamedTensor& t) { return t.name == p->name; });
        if (it == params.end()) throw std::runtime_error("restore: missing parameter '" + p->name + "'");
        if (it->value.rows() != p->value.rows() || it->value.cols() != p->value.cols())
            throw std::runtime_error("restore: parameter '" + p->name + "' has shape " +
                                     std::to_string(it->value.rows()) + "x" + std::to_string(it->value.cols()) +
                                     ", model expects " + std::to_string(p->value.rows()) + "x" +
                                     std::to_string(p->value.cols()));
        p->value = it->value;
    }
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const TrainHooks& hooks)
{
    cfg.validate();
    if (ds.labels.multilabel != cfg.multilabel)
        throw ConfigError(std::string("config multilabel = ") + (cfg.multilabel ? "true" : "false") +
                          " but dataset is " + (ds.labels.multilabel ? "multi-label" : "single-label"));
    if (ds.split.train.empty()) throw std::invalid_argument("train: empty train split");
    if (ds.split.val.empty()) throw std::invalid_argument("train: empty val split");

    TrainResult result;
    result.model = std::make_unique<HINormerModel>(cfg.model_config(ds.labels.num_classes), ds.graph, cfg.seed);
    HINormerModel& model = *result.model;
    const std::vector<Parameter*> params = model.parameters();

    const auto train_labels = labels_of(ds, ds.split.train);
    std::vector<ContextSequence> train_ctx = contexts_for(ds.graph, ds.split.train, cfg);
    const std::vector<ContextSequence> val_ctx = contexts_for(ds.graph, ds.split.val, cfg);

    Adam adam(AdamConfig{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
    PlateauScheduler plateau(cfg.learning_rate, cfg.lr_factor, cfg.lr_wait, cfg.min_lr);
    EarlyStopping stopper(cfg.patience, true);
    std::vector<NamedTensor> best = snapshot(model);
    int epochs_run = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = Clock::now();
        if (cfg.sampler == SamplingPolicy::SeededRandom && epoch > 1)
            train_ctx = contexts_for(ds.graph, ds.split.train, cfg, static_cast<std::uint64_t>(epoch));

        std::vector<std::size_t> order(train_ctx.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t batch = cfg.batch_size > 0 ? static_cast<std::size_t>(cfg.batch_size) : order.size();
        if (batch < order.size()) {
            Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), hash_string("batches")));
            shuffle_rng.shuffle(order);
        }
        Rng dropout_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), hash_string("dropout")));

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t n = std::min(batch, order.size() - start);
            std::vector<ContextSequence> seqs;
            std::vector<std::vector<int>> labels;
            for (std::size_t k = start; k < start + n; ++k) {
                seqs.push_back(train_ctx[order[k]]);
                labels.push_back(train_labels[order[k]]);
            }
            for (Parameter* p : params) p->zero_grad();
            ad::Tape tape;
            ForwardContext ctx{true, 0.0, &dropout_rng};
            ad::Var pred = model.forward(tape, seqs, ctx);
            ad::Var loss = batch_loss(pred, labels, cfg.multilabel, cfg.loss_reduction);
            const double value = loss.scalar();
            if (!std::isfinite(value))
                throw DivergenceError("training loss became " + std::string(std::isnan(value) ? "NaN" : "infinite") +
                                      " at epoch " + std::to_string(epoch));
            tape.backward(loss);
            adam.step(params, plateau.lr());
            epoch_loss += cfg.loss_reduction == Reduction::Mean ? value * static_cast<double>(n) : value;
        }
        if (cfg.loss_reduction == Reduction::Mean) epoch_loss /= static_cast<double>(order.size());

        const Metrics val = evaluate_contexts(model, ds, ds.split.val, val_ctx);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss;
        rec.val_loss = val.loss;
        rec.val_micro_f1 = val.micro_f1;
        rec.val_macro_f1 = val.macro_f1;
        rec.lr = plateau.lr();
        plateau.step(val.loss);
        const bool stop = stopper.step(val.loss);
        if (stopper.improved()) {
            best = snapshot(model);
            result.best_epoch = epoch;
        }
        rec.seconds = seconds_since(t0);
        result.history.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        epochs_run = epoch;
        if (stop) {
            result.stopped_early = true;
            break;
        }
    }

    restore(model, best);
    result.val = evaluate_contexts(model, ds, ds.split.val, val_ctx);
    if (!ds.split.test.empty()) result.test = evaluate(model, ds, SplitPart::Test, cfg);

    Checkpoint& ck = result.checkpoint;
    ck.config_text = cfg.to_text();
    ck.dataset_checksum = ds.checksum();
    ck.epoch = epochs_run;
    ck.best_epoch = result.best_epoch;
    ck.best_metric = result.best_epoch > 0 ? stopper.best() : result.val.loss;
    ck.lr = plateau.lr();
    ck.params = std::move(best);
    ck.adam = adam.state();
    return result;
}

GradCheckReport model_grad_check(const Dataset& ds, const TrainConfig& cfg, const GradCheckOptions& options)
{
    cfg.validate();
    HINormerModel model(cfg.model_config(ds.labels.num_classes), ds.graph, cfg.seed);
    const auto contexts = contexts_for(ds.graph, ds.split.train, cfg);
    const auto labels = labels_of(ds, ds.split.train);
    std::vector<Parameter*> params;
    for (Parameter* p : model.parameters())
        if (p->trainable) params.push_back(p);
    auto loss = [&](ad::Tape& tape) {
        ForwardContext ctx;
        return batch_loss(model.forward(tape, contexts, ctx), labels, cfg.multilabel, cfg.loss_reduction);
    };
    return grad_check(loss, params, options);
}

} // namespace hinormer
