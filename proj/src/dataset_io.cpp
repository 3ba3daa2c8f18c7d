#include "hinormer/dataset.hpp"

#include "hinormer/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace hinormer {

namespace {

std::vector<std::string> split_on(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

class LineReader {
public:
    explicit LineReader(const fs::path& path) : path_(path), in_(path)
    {
        if (!in_) throw DataError("cannot open " + path.string());
    }

    bool next(std::string& line)
    {
        while (std::getline(in_, line)) {
            ++number_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw DataError(path_.string() + ":" + std::to_string(number_) + ": " + what);
    }

    int parse_int(const std::string& s) const
    {
        int v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail("expected integer, got '" + s + "'");
        return v;
    }

    double parse_double(const std::string& s) const
    {
        double v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail("expected number, got '" + s + "'");
        return v;
    }

private:
    fs::path path_;
    std::ifstream in_;
    int number_ = 0;
};

std::string format_double(double x)
{
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

bool parse_bool(const std::string& s)
{
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    throw DataError("expected boolean, got '" + s + "'");
}

/// Collects per-type feature rows while validating widths.
class FeatureCollector {
public:
    FeatureCollector(int num_types) : width_(num_types, -2), rows_(num_types) {}

    /// width -1 marks a featureless node.
    void add(int type, const std::string& node, std::vector<double> values, const LineReader& r)
    {
        const int w = values.empty() ? -1 : static_cast<int>(values.size());
        if (width_[type] == -2) width_[type] = w;
        if (width_[type] != w) {
            if (width_[type] == -1)
                r.fail("node " + node + " has features but type " + std::to_string(type) + " is featureless");
            r.fail("node " + node + " has " + std::to_string(std::max(w, 0)) + " features, expected width " +
                   std::to_string(width_[type]));
        }
        rows_[type].push_back(std::move(values));
    }

    FeatureTable finish(const std::vector<int>& node_type) const
    {
        const int t_count = static_cast<int>(width_.size());
        std::vector<bool> onehot(t_count);
        std::vector<Eigen::MatrixXd> dense(t_count);
        for (int t = 0; t < t_count; ++t) {
            onehot[t] = width_[t] < 0;
            if (onehot[t]) continue;
            dense[t].resize(static_cast<Eigen::Index>(rows_[t].size()), width_[t]);
            for (std::size_t i = 0; i < rows_[t].size(); ++i)
                for (int j = 0; j < width_[t]; ++j) dense[t](static_cast<Eigen::Index>(i), j) = rows_[t][i][j];
        }
        return FeatureTable(node_type, t_count, std::move(onehot), std::move(dense));
    }

private:
    std::vector<int> width_;
    std::vector<std::vector<std::vector<double>>> rows_;
};

std::vector<double> parse_feature_csv(const std::string& field, const LineReader& r)
{
    std::vector<double> values;
    if (field.empty() || field == "-") return values;
    for (const auto& tok : split_on(field, ',')) values.push_back(r.parse_double(trim(tok)));
    return values;
}

} // namespace

const std::vector<NodeId>& Split::part(SplitPart p) const
{
    switch (p) {
    case SplitPart::Train: return train;
    case SplitPart::Val: return val;
    case SplitPart::Test: return test;
    }
    return test;
}

SplitPart parse_split_part(const std::string& s)
{
    if (s == "train") return SplitPart::Train;
    if (s == "val") return SplitPart::Val;
    if (s == "test") return SplitPart::Test;
    throw DataError("unknown split '" + s + "' (expected train, val or test)");
}

const char* to_string(SplitPart p)
{
    switch (p) {
    case SplitPart::Train: return "train";
    case SplitPart::Val: return "val";
    case SplitPart::Test: return "test";
    }
    return "?";
}

std::uint64_t Dataset::checksum() const
{
    std::uint64_t h = graph.checksum();
    h = mix_seed(h, static_cast<std::uint64_t>(info.target_type), static_cast<std::uint64_t>(info.num_classes));
    h = mix_seed(h, info.multilabel ? 1u : 0u);
    for (std::size_t v = 0; v < labels.labels.size(); ++v)
        for (int c : labels.labels[v]) h = mix_seed(h, v, static_cast<std::uint64_t>(c));
    for (SplitPart p : {SplitPart::Train, SplitPart::Val, SplitPart::Test}) {
        h = mix_seed(h, 0xabcdef + static_cast<std::uint64_t>(p));
        for (NodeId v : split.part(p)) h = mix_seed(h, static_cast<std::uint64_t>(v));
    }
    return h;
}

DatasetFiles DatasetFiles::in(const fs::path& dir)
{
    return DatasetFiles{dir / "nodes.tsv", dir / "edges.tsv", dir / "labels.tsv", dir / "split.tsv",
                        dir / "manifest.txt"};
}

DatasetInfo read_manifest(const fs::path& path)
{
    LineReader r(path);
    DatasetInfo info;
    std::set<std::string> seen;
    std::string line;
    while (r.next(line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) r.fail("expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "name") info.name = value;
        else if (key == "num_node_types") info.num_node_types = r.parse_int(value);
        else if (key == "num_edge_types") info.num_edge_types = r.parse_int(value);
        else if (key == "target_type") info.target_type = r.parse_int(value);
        else if (key == "num_classes") info.num_classes = r.parse_int(value);
        else if (key == "multilabel") {
            try {
                info.multilabel = parse_bool(value);
            } catch (const DataError& e) {
                r.fail(e.what());
            }
        } else r.fail("unknown manifest key '" + key + "'");
        seen.insert(key);
    }
    for (const char* required : {"num_node_types", "num_edge_types", "target_type", "num_classes"})
        if (!seen.count(required)) throw DataError(path.string() + ": missing key " + required);
    if (info.num_node_types < 1 || info.num_edge_types < 1 || info.num_classes < 1)
        throw DataError(path.string() + ": type and class counts must be positive");
    if (info.target_type < 0 || info.target_type >= info.num_node_types)
        throw DataError(path.string() + ": target_type outside [0, num_node_types)");
    return info;
}

void write_manifest(const DatasetInfo& info, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "name=" << info.name << '\n'
        << "num_node_types=" << info.num_node_types << '\n'
        << "num_edge_types=" << info.num_edge_types << '\n'
        << "target_type=" << info.target_type << '\n'
        << "num_classes=" << info.num_classes << '\n'
        << "multilabel=" << (info.multilabel ? "true" : "false") << '\n';
}

Dataset load_graph(const DatasetFiles& files)
{
    Dataset ds;
    ds.info = read_manifest(files.manifest);
    const DatasetInfo& info = ds.info;

    std::unordered_map<std::string, NodeId> id_of;
    std::vector<int> node_type;
    FeatureCollector features(info.num_node_types);
    {
        LineReader r(files.nodes);
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() < 2 || f.size() > 3) r.fail("expected node_id<TAB>node_type[<TAB>features]");
            const std::string id = trim(f[0]);
            const int type = r.parse_int(trim(f[1]));
            if (type < 0 || type >= info.num_node_types)
                r.fail("node " + id + " has type " + std::to_string(type) + " outside [0, " +
                       std::to_string(info.num_node_types) + ")");
            if (!id_of.emplace(id, static_cast<NodeId>(node_type.size())).second) r.fail("duplicate node id " + id);
            ds.original_ids.push_back(id);
            node_type.push_back(type);
            features.add(type, id, parse_feature_csv(f.size() == 3 ? trim(f[2]) : "-", r), r);
        }
    }

    auto resolve = [&](const std::string& token, const LineReader& r) {
        const auto it = id_of.find(token);
        if (it == id_of.end()) r.fail("unknown node id " + token);
        return it->second;
    };

    std::vector<Edge> edges;
    {
        LineReader r(files.edges);
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() != 3) r.fail("expected src<TAB>dst<TAB>edge_type");
            const NodeId s = resolve(trim(f[0]), r);
            const NodeId d = resolve(trim(f[1]), r);
            const int type = r.parse_int(trim(f[2]));
            if (type < 0 || type >= info.num_edge_types)
                r.fail("edge type " + std::to_string(type) + " outside [0, " + std::to_string(info.num_edge_types) +
                       ")");
            edges.push_back(Edge{s, d, type});
        }
    }

    const int n = static_cast<int>(node_type.size());
    FeatureTable table = features.finish(node_type);
    ds.graph = HeteroGraph::build(n, node_type, info.num_node_types, info.num_edge_types, std::move(edges),
                                  std::move(table));

    ds.labels.num_classes = info.num_classes;
    ds.labels.multilabel = info.multilabel;
    ds.labels.labels.assign(n, {});
    {
        LineReader r(files.labels);
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() != 2) r.fail("expected node_id<TAB>label");
            const NodeId v = resolve(trim(f[0]), r);
            if (node_type[v] != info.target_type)
                r.fail("node " + trim(f[0]) + " is labeled but has type " + std::to_string(node_type[v]) +
                       ", target type is " + std::to_string(info.target_type));
            if (ds.labels.has_label(v)) r.fail("node " + trim(f[0]) + " labeled twice");
            const auto toks = split_on(trim(f[1]), ',');
            if (toks.size() > 1 && !info.multilabel) r.fail("multiple labels in a single-label dataset");
            std::vector<int> ls;
            for (const auto& tok : toks) {
                const int c = r.parse_int(trim(tok));
                if (c < 0 || c >= info.num_classes)
                    r.fail("label " + std::to_string(c) + " outside [0, " + std::to_string(info.num_classes) + ")");
                ls.push_back(c);
            }
            std::sort(ls.begin(), ls.end());
            ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
            ds.labels.labels[v] = std::move(ls);
        }
    }

    {
        LineReader r(files.split);
        std::vector<bool> assigned(n, false);
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() != 2) r.fail("expected node_id<TAB>{train|val|test}");
            const NodeId v = resolve(trim(f[0]), r);
            if (!ds.labels.has_label(v)) r.fail("node " + trim(f[0]) + " is in the split but unlabeled");
            if (assigned[v]) r.fail("node " + trim(f[0]) + " appears in the split twice");
            assigned[v] = true;
            SplitPart part{};
            try {
                part = parse_split_part(trim(f[1]));
            } catch (const DataError& e) {
                r.fail(e.what());
            }
            switch (part) {
            case SplitPart::Train: ds.split.train.push_back(v); break;
            case SplitPart::Val: ds.split.val.push_back(v); break;
            case SplitPart::Test: ds.split.test.push_back(v); break;
            }
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir)
{
    fs::create_directories(dir);
    const DatasetFiles files = DatasetFiles::in(dir);
    const HeteroGraph& g = ds.graph;
    auto id = [&](NodeId v) {
        return ds.original_ids.empty() ? std::to_string(v) : ds.original_ids[static_cast<std::size_t>(v)];
    };
    auto open = [](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw DataError("cannot write " + p.string());
        return out;
    };

    write_manifest(ds.info, files.manifest);
    {
        auto out = open(files.nodes);
        const FeatureTable& ft = g.features();
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            const int t = g.node_type(v);
            out << id(v) << '\t' << t << '\t';
            if (ft.is_onehot_identity(t)) {
                out << '-';
            } else {
                const auto row = ft.rows(t).row(ft.local_index(v));
                for (Eigen::Index j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row(j));
            }
            out << '\n';
        }
    }
    {
        auto out = open(files.edges);
        for (const Edge& e : g.edges()) out << id(e.src) << '\t' << id(e.dst) << '\t' << e.type << '\n';
    }
    {
        auto out = open(files.labels);
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            if (!ds.labels.has_label(v)) continue;
            out << id(v) << '\t';
            for (std::size_t k = 0; k < ds.labels.labels[v].size(); ++k) out << (k ? "," : "") << ds.labels.labels[v][k];
            out << '\n';
        }
    }
    {
        auto out = open(files.split);
        for (SplitPart p : {SplitPart::Train, SplitPart::Val, SplitPart::Test})
            for (NodeId v : ds.split.part(p)) out << id(v) << '\t' << to_string(p) << '\n';
    }
}

Dataset load_hgb(const fs::path& dir, double val_fraction, std::uint64_t seed)
{
    Dataset ds;
    ds.info.name = dir.filename().string();

    std::map<int, int> raw_type;
    std::map<int, std::vector<double>> raw_features;
    int max_id = -1, max_type = -1;
    {
        LineReader r(dir / "node.dat");
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() < 3) r.fail("expected id<TAB>name<TAB>type[<TAB>features]");
            const int id = r.parse_int(trim(f[0]));
            const int type = r.parse_int(trim(f[2]));
            if (id < 0 || type < 0) r.fail("negative id or type");
            if (!raw_type.emplace(id, type).second) r.fail("duplicate node id " + std::to_string(id));
            if (f.size() > 3) raw_features[id] = parse_feature_csv(trim(f[3]), r);
            max_id = std::max(max_id, id);
            max_type = std::max(max_type, type);
        }
    }
    const int n = max_id + 1;
    if (static_cast<int>(raw_type.size()) != n) throw DataError((dir / "node.dat").string() + ": node ids are not dense");
    ds.info.num_node_types = max_type + 1;

    std::vector<int> node_type(n);
    for (const auto& [id, t] : raw_type) node_type[id] = t;
    for (int v = 0; v < n; ++v) ds.original_ids.push_back(std::to_string(v));

    std::vector<Edge> edges;
    int max_edge_type = -1;
    {
        LineReader r(dir / "link.dat");
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() < 3) r.fail("expected src<TAB>dst<TAB>type[<TAB>weight]");
            const int s = r.parse_int(trim(f[0]));
            const int d = r.parse_int(trim(f[1]));
            const int t = r.parse_int(trim(f[2]));
            for (int end : {s, d})
                if (end < 0 || end >= n) r.fail("edge references unknown node " + std::to_string(end));
            if (t < 0) r.fail("negative edge type");
            edges.push_back(Edge{s, d, t});
            max_edge_type = std::max(max_edge_type, t);
        }
    }
    ds.info.num_edge_types = max_edge_type + 1;

    FeatureCollector collector(ds.info.num_node_types);
    {
        LineReader r(dir / "node.dat");
        for (int v = 0; v < n; ++v) {
            auto it = raw_features.find(v);
            collector.add(node_type[v], std::to_string(v), it == raw_features.end() ? std::vector<double>{} : it->second,
                          r);
        }
    }
    raw_features.clear();
    ds.graph = HeteroGraph::build(n, node_type, ds.info.num_node_types, ds.info.num_edge_types, std::move(edges),
                                  collector.finish(node_type));

    ds.labels.labels.assign(n, {});
    int max_label = -1, target_type = -1;
    auto read_labels = [&](const fs::path& p, std::vector<NodeId>& into) {
        LineReader r(p);
        std::string line;
        while (r.next(line)) {
            const auto f = split_on(line, '\t');
            if (f.size() < 4) r.fail("expected id<TAB>name<TAB>type<TAB>label");
            const int v = r.parse_int(trim(f[0]));
            if (v < 0 || v >= n) r.fail("label for unknown node " + std::to_string(v));
            if (target_type < 0) target_type = node_type[v];
            if (node_type[v] != target_type) r.fail("labeled nodes of more than one type");
            std::vector<int> ls;
            for (const auto& tok : split_on(trim(f[3]), ',')) {
                ls.push_back(r.parse_int(trim(tok)));
                max_label = std::max(max_label, ls.back());
            }
            if (ls.size() > 1) ds.labels.multilabel = true;
            ds.labels.labels[v] = std::move(ls);
            into.push_back(v);
        }
    };
    std::vector<NodeId> labeled;
    read_labels(dir / "label.dat", labeled);
    if (fs::exists(dir / "label.dat.test")) read_labels(dir / "label.dat.test", ds.split.test);

    Rng rng(seed);
    rng.shuffle(labeled);
    const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(labeled.size()));
    ds.split.val.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_val));
    ds.split.train.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_val), labeled.end());
    for (auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) std::sort(part->begin(), part->end());

    ds.info.target_type = std::max(target_type, 0);
    ds.info.num_classes = max_label + 1;
    ds.info.multilabel = ds.labels.multilabel;
    ds.labels.num_classes = ds.info.num_classes;
    return ds;
}

Dataset load_dataset(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    if (fs::exists(dir / "node.dat")) return load_hgb(dir);
    return load_graph(DatasetFiles::in(dir));
}

} // namespace hinormer
