#include "hinormer/checkpoint.hpp"
#include "hinormer/config.hpp"
#include "hinormer/context.hpp"
#include "hinormer/dataset.hpp"
#include "hinormer/synthetic.hpp"
#include "hinormer/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>

#ifndef HINORMER_VERSION
#define HINORMER_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hinormer;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kDivergence = 3 };

std::string timestamp(const char* format)
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

std::string iso_now() { return timestamp("%Y-%m-%dT%H:%M:%SZ"); }

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

fs::path fresh_dir(const fs::path& root, const std::string& name)
{
    fs::path dir = root / name;
    for (int k = 1; fs::exists(dir); ++k) dir = root / (name + "-" + std::to_string(k));
    fs::create_directories(dir);
    return dir;
}

std::string hex(std::uint64_t x)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

json metrics_json(const Metrics& m)
{
    return json{{"micro_f1", m.micro_f1}, {"macro_f1", m.macro_f1}, {"loss", m.loss}, {"seconds", m.seconds}};
}

/// Flags shared by every command that builds a TrainConfig. Values are only
/// applied when given, so they override the config file.
struct ConfigFlags {
    std::string config_path;
    std::string dataset_dir;
    std::string out_dir;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool no_lse = false;
    bool no_hre = false;

    void attach(CLI::App* app)
    {
        app->add_option("--config", config_path, "key = value config file");
        app->add_option("--dataset-dir", dataset_dir, "dataset directory");
        app->add_option("--out-dir", out_dir, "root for run directories");
        app->add_option("--set", sets, "extra key=value override (repeatable)");
        add(app, "--seed", "seed");
        add(app, "--mechanism", "mechanism", "gatv2|gat|dot");
        add(app, "--beta", "beta");
        add(app, "--layers", "layers");
        add(app, "--dim", "dim");
        add(app, "--heads", "heads");
        add(app, "--seq-len", "seq_len");
        add(app, "--hops", "hops");
        add(app, "--ks", "ks");
        add(app, "--kh", "kh");
        add(app, "--epochs", "epochs");
        add(app, "--lr", "learning_rate");
        add(app, "--dropout", "dropout");
        add(app, "--patience", "patience");
        app->add_flag("--no-lse", no_lse, "skip the local structure encoder");
        app->add_flag("--no-hre", no_hre, "skip the relation encoder");
    }

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help = "")
    {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, help.empty() ? key : help);
    }

    TrainConfig build() const
    {
        TrainConfig cfg;
        if (!config_path.empty()) cfg.apply_file(config_path);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (no_lse) cfg.no_lse = true;
        if (no_hre) cfg.no_hre = true;
        if (!dataset_dir.empty()) cfg.dataset_dir = dataset_dir;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (cfg.out_dir.empty()) {
            const char* env = std::getenv("HINORMER_OUT_DIR");
            cfg.out_dir = env && *env ? env : "runs";
        }
        cfg.validate();
        return cfg;
    }
};

Dataset require_dataset(const TrainConfig& cfg)
{
    if (cfg.dataset_dir.empty()) throw ConfigError("no dataset: pass --dataset-dir or set dataset_dir");
    return load_dataset(cfg.dataset_dir);
}

json dump_attention(HINormerModel& model, const Dataset& ds, const TrainConfig& cfg)
{
    json out = json::array();
    const auto contexts = contexts_for(ds.graph, ds.split.test, cfg);
    for (const ContextSequence& seq : contexts) {
        ad::Tape tape;
        ForwardContext ctx;
        std::vector<std::vector<std::vector<Eigen::MatrixXd>>> maps;
        model.forward(tape, std::span<const ContextSequence>(&seq, 1), ctx, &maps);
        json layers = json::array();
        for (const auto& layer : maps.front()) {
            json heads = json::array();
            for (const auto& w : layer) {
                json rows = json::array();
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    json row = json::array();
                    for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
                    rows.push_back(std::move(row));
                }
                heads.push_back(std::move(rows));
            }
            layers.push_back(std::move(heads));
        }
        json nodes = json::array();
        for (NodeId v : seq.nodes) nodes.push_back(v < 0 ? std::string("-") : ds.original_ids[v]);
        out.push_back(json{{"target", ds.original_ids[seq.target]}, {"nodes", nodes}, {"weights", layers}});
    }
    return out;
}

struct RunOutcome {
    fs::path dir;
    Metrics test;
};

RunOutcome run_one(const Dataset& ds, TrainConfig cfg, const std::string& config_path, bool attention,
                   const std::vector<std::string>& argv)
{
    const std::string started = iso_now();
    const fs::path dir = fresh_dir(cfg.out_dir, timestamp("%Y%m%dT%H%M%S") + "-seed" + std::to_string(cfg.seed));
    TrainHooks hooks;
    hooks.on_epoch = [](const EpochRecord& r) {
        std::clog << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss
                  << " val_micro_f1 " << r.val_micro_f1 << " lr " << r.lr << '\n';
    };
    TrainResult res = train(ds, cfg, hooks);

    write_checkpoint(dir / "checkpoint.bin", res.checkpoint);
    write_text(dir / "metrics.jsonl", metrics_jsonl(res.history));
    write_text(dir / "timings.jsonl", timings_jsonl(res.history));
    write_text(dir / "config.txt", cfg.to_text());
    if (attention) write_text(dir / "attention.json", dump_attention(*res.model, ds, cfg).dump() + "\n");
    const json summary{{"seed", cfg.seed},
                       {"epochs_run", res.checkpoint.epoch},
                       {"best_epoch", res.best_epoch},
                       {"stopped_early", res.stopped_early},
                       {"val", metrics_json(res.val)},
                       {"test", metrics_json(res.test)}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    const json manifest{{"command", "train"},
                        {"argv", argv},
                        {"config_path", config_path},
                        {"dataset_dir", cfg.dataset_dir},
                        {"dataset_checksum", hex(ds.checksum())},
                        {"seed", cfg.seed},
                        {"tool_version", HINORMER_VERSION},
                        {"started_at", started},
                        {"finished_at", iso_now()}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << json{{"run_dir", dir.string()}, {"test", metrics_json(res.test)}}.dump() << '\n';
    return {dir, res.test};
}

json mean_std(const std::vector<double>& xs)
{
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    return json{{"mean", mean}, {"std", sd}, {"values", xs}};
}

int cmd_train(const ConfigFlags& flags, int seeds, bool attention, const std::vector<std::string>& argv)
{
    TrainConfig cfg = flags.build();
    const Dataset ds = require_dataset(cfg);
    if (seeds <= 1) {
        run_one(ds, cfg, flags.config_path, attention, argv);
        return kOk;
    }
    const std::uint64_t base = cfg.seed;
    std::vector<double> micro, macro;
    json runs = json::array();
    for (int k = 0; k < seeds; ++k) {
        cfg.seed = base + static_cast<std::uint64_t>(k);
        const RunOutcome r = run_one(ds, cfg, flags.config_path, attention, argv);
        micro.push_back(r.test.micro_f1);
        macro.push_back(r.test.macro_f1);
        runs.push_back(r.dir.string());
    }
    const fs::path dir = fresh_dir(cfg.out_dir, timestamp("%Y%m%dT%H%M%S") + "-seeds" + std::to_string(seeds));
    const json agg{{"seeds", seeds},
                   {"first_seed", base},
                   {"runs", runs},
                   {"test_micro_f1", mean_std(micro)},
                   {"test_macro_f1", mean_std(macro)}};
    write_text(dir / "aggregate.json", agg.dump(2) + "\n");
    const json manifest{{"command", "train"},     {"argv", argv},
                        {"config_path", flags.config_path}, {"dataset_checksum", hex(ds.checksum())},
                        {"seed", base},           {"tool_version", HINORMER_VERSION},
                        {"finished_at", iso_now()}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << json{{"aggregate", (dir / "aggregate.json").string()},
                      {"test_micro_f1", agg["test_micro_f1"]["mean"]},
                      {"test_micro_f1_std", agg["test_micro_f1"]["std"]}}
                     .dump()
              << '\n';
    return kOk;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint_path, const std::string& split)
{
    std::optional<Checkpoint> ck;
    TrainConfig cfg;
    if (!checkpoint_path.empty()) {
        ck = read_checkpoint(checkpoint_path);
        cfg.apply_text(ck->config_text, checkpoint_path + " (config)");
        cfg.dataset_dir = flags.dataset_dir.empty() ? cfg.dataset_dir : flags.dataset_dir;
    } else {
        cfg = flags.build();
    }
    const Dataset ds = require_dataset(cfg);
    if (ck && ck->dataset_checksum != ds.checksum())
        std::clog << "warning: dataset checksum differs from the one recorded in the checkpoint\n";
    HINormerModel model(cfg.model_config(ds.labels.num_classes), ds.graph, cfg.seed);
    if (ck) restore(model, ck->params);
    const SplitPart part = parse_split_part(split);
    const Metrics m = evaluate(model, ds, part, cfg);
    json rec = metrics_json(m);
    rec["split"] = split;
    rec["nodes"] = ds.split.part(part).size();
    std::cout << rec.dump() << '\n';
    return kOk;
}

int cmd_sample(const std::string& dataset_dir, const std::string& node, int hops, int seq_len,
               const std::string& policy, std::uint64_t seed)
{
    const Dataset ds = load_dataset(dataset_dir);
    NodeId v = -1;
    for (std::size_t i = 0; i < ds.original_ids.size(); ++i)
        if (ds.original_ids[i] == node) v = static_cast<NodeId>(i);
    if (v < 0) throw DataError("unknown node id '" + node + "'");
    SamplerConfig sc;
    sc.hops = hops;
    sc.seq_len = seq_len;
    sc.policy = parse_sampling_policy(policy);
    sc.seed = seed;
    const ContextSequence seq = sample_context(ds.graph, v, sc);
    std::cout << "position\tnode\ttype\thop\tmask\n";
    for (std::size_t i = 0; i < seq.nodes.size(); ++i) {
        const NodeId u = seq.nodes[i];
        std::cout << i << '\t' << (u < 0 ? "-" : ds.original_ids[u]) << '\t'
                  << (u < 0 ? std::string("-") : std::to_string(ds.graph.node_type(u))) << '\t' << seq.hop[i] << '\t'
                  << int(seq.mask[i]) << '\n';
    }
    return kOk;
}

int cmd_gradcheck(const ConfigFlags& flags)
{
    TrainConfig cfg;
    cfg.seq_len = 6;
    cfg.layers = 2;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.ks = 2;
    cfg.kh = 2;
    cfg.epochs = 1;
    cfg.patience = 1;
    if (!flags.config_path.empty()) cfg.apply_file(flags.config_path);
    for (const auto& [k, v] : flags.overrides) cfg.set(k, v);
    if (flags.no_lse) cfg.no_lse = true;
    if (flags.no_hre) cfg.no_hre = true;
    cfg.dropout = 0.0;
    cfg.validate();
    const GradCheckReport report = model_grad_check(make_fixture(), cfg);
    std::cout << report.to_string();
    std::cout << (report.passed ? "PASS" : "FAIL") << '\n';
    return report.passed ? kOk : kDivergence;
}

int cmd_synth(const std::string& out, const SynthSpec& spec, const std::vector<std::string>& argv)
{
    const std::string started = iso_now();
    const Dataset ds = make_synthetic(spec);
    save_dataset(ds, out);
    const json manifest{{"command", "synth"},
                        {"argv", argv},
                        {"dataset_checksum", hex(ds.checksum())},
                        {"seed", spec.seed},
                        {"tool_version", HINORMER_VERSION},
                        {"started_at", started},
                        {"finished_at", iso_now()}};
    write_text(fs::path(out) / "synth-manifest.json", manifest.dump(2) + "\n");
    std::cout << json{{"dir", out}, {"nodes", ds.graph.num_nodes()}, {"edges", ds.graph.num_edges()},
                      {"checksum", hex(ds.checksum())}}
                     .dump()
              << '\n';
    return kOk;
}

int cmd_stats(const std::string& dataset_dir)
{
    const Dataset ds = load_dataset(dataset_dir);
    const HeteroGraph& g = ds.graph;
    json per_type = json::array();
    for (int t = 0; t < g.num_node_types(); ++t) per_type.push_back(g.features().members(t).size());
    const json out{{"name", ds.info.name},
                   {"nodes", g.num_nodes()},
                   {"edges", g.num_edges()},
                   {"node_types", g.num_node_types()},
                   {"edge_types", g.num_edge_types()},
                   {"classes", ds.labels.num_classes},
                   {"multilabel", ds.labels.multilabel},
                   {"target_type", ds.info.target_type},
                   {"nodes_per_type", per_type},
                   {"train", ds.split.train.size()},
                   {"val", ds.split.val.size()},
                   {"test", ds.split.test.size()},
                   {"checksum", hex(ds.checksum())}};
    std::cout << out.dump() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Heterogeneous graph transformer for node classification"};
    app.require_subcommand(1);
    std::vector<std::string> args(argv, argv + argc);

    ConfigFlags train_flags;
    int seeds = 1;
    bool attention = false;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
    train_flags.attach(train_cmd);
    train_cmd->add_option("--seeds", seeds, "number of consecutive seeds to run");
    train_cmd->add_flag("--dump-attention", attention, "write test-node attention weights");

    ConfigFlags eval_flags;
    std::string checkpoint, split = "test";
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (or a fresh model) on a split");
    eval_flags.attach(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint.bin from a run directory");
    eval_cmd->add_option("--split", split, "train|val|test");

    std::string sample_dir, node, policy = "deterministic";
    int hops = 2, seq_len = 20;
    std::uint64_t sample_seed = 0;
    CLI::App* sample_cmd = app.add_subcommand("sample", "print the context sequence of one node");
    sample_cmd->add_option("--dataset-dir", sample_dir)->required();
    sample_cmd->add_option("--node", node, "node id as written in the dataset")->required();
    sample_cmd->add_option("--hops", hops);
    sample_cmd->add_option("--seq-len", seq_len);
    sample_cmd->add_option("--policy", policy, "deterministic|random");
    sample_cmd->add_option("--seed", sample_seed);

    ConfigFlags grad_flags;
    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check on a 10-node fixture");
    grad_flags.attach(grad_cmd);

    SynthSpec spec;
    std::string synth_out;
    CLI::App* synth_cmd = app.add_subcommand("synth", "write the neighbor-composition benchmark dataset");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--nodes", spec.num_nodes);
    synth_cmd->add_option("--types", spec.num_types);
    synth_cmd->add_option("--feature-dim", spec.feature_dim);
    synth_cmd->add_option("--seed", spec.seed);
    synth_cmd->add_flag("--onehot-others", spec.onehot_others, "one-hot identity features on non-target types");

    std::string stats_dir;
    CLI::App* stats_cmd = app.add_subcommand("stats", "print dataset statistics");
    stats_cmd->add_option("--dataset-dir", stats_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*train_cmd) return cmd_train(train_flags, seeds, attention, args);
        if (*eval_cmd) return cmd_eval(eval_flags, checkpoint, split);
        if (*sample_cmd) return cmd_sample(sample_dir, node, hops, seq_len, policy, sample_seed);
        if (*grad_cmd) return cmd_gradcheck(grad_flags);
        if (*synth_cmd) return cmd_synth(synth_out, spec, args);
        if (*stats_cmd) return cmd_stats(stats_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
