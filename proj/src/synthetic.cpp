#include "hinormer/synthetic.hpp"

#include "hinormer/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace hinormer {

void SynthSpec::validate() const
{
    if (num_types < 2) throw std::invalid_argument("synth: need at least two node types");
    if (min_degree < 1 || max_degree < min_degree) throw std::invalid_argument("synth: invalid degree range");
    if (min_margin < 1) throw std::invalid_argument("synth: min_margin must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("synth: feature_dim must be positive");
    if (target_fraction <= 0.0 || target_fraction >= 1.0)
        throw std::invalid_argument("synth: target_fraction must lie in (0, 1)");
    if (train_fraction <= 0.0 || val_fraction <= 0.0 || train_fraction + val_fraction >= 1.0)
        throw std::invalid_argument("synth: train and val fractions must be positive and leave room for test");
    const int targets = static_cast<int>(std::lround(num_nodes * target_fraction));
    const int per_other = (num_nodes - targets) / (num_types - 1);
    if (targets < 10 || per_other < max_degree)
        throw std::invalid_argument("synth: too few nodes for the requested types and degrees");
}

int dominant_neighbor_type(const HeteroGraph& g, NodeId v)
{
    std::vector<int> hist(static_cast<std::size_t>(g.num_node_types()), 0);
    for (const Arc& a : g.neighbors(v)) ++hist[static_cast<std::size_t>(g.node_type(a.node))];
    const auto top = std::max_element(hist.begin(), hist.end());
    if (*top == 0 || std::count(hist.begin(), hist.end(), *top) > 1) return -1;
    return static_cast<int>(top - hist.begin());
}

namespace {

int pair_type(int a, int b, int num_types)
{
    if (a > b) std::swap(a, b);
    return a * num_types - a * (a - 1) / 2 + (b - a);
}

} // namespace

Dataset make_synthetic(const SynthSpec& spec)
{
    spec.validate();
    const int n = spec.num_nodes;
    const int T = spec.num_types;
    const int targets = static_cast<int>(std::lround(n * spec.target_fraction));
    Rng rng(mix_seed(spec.seed, hash_string("synthetic")));

    std::vector<int> type(static_cast<std::size_t>(n));
    std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(T));
    for (NodeId v = 0; v < n; ++v) {
        type[v] = v < targets ? 0 : 1 + (v - targets) % (T - 1);
        members[type[v]].push_back(v);
    }

    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<std::vector<int>> hist(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(T), 0));
    std::vector<Edge> edges;
    auto connect = [&](NodeId u, NodeId w) {
        if (u == w || !seen.insert({std::min(u, w), std::max(u, w)}).second) return false;
        edges.push_back({u, w, pair_type(type[u], type[w], T)});
        ++hist[u][type[w]];
        ++hist[w][type[u]];
        return true;
    };
    auto connect_to_type = [&](NodeId v, int t) {
        const auto& pool = members[t];
        for (int attempt = 0; attempt < 64; ++attempt)
            if (connect(v, pool[rng.below(pool.size())])) return;
        for (NodeId w : pool)
            if (connect(v, w)) return;
    };

    for (NodeId v = 0; v < targets; ++v) {
        const int intended = static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
        const int degree = spec.min_degree + static_cast<int>(rng.below(spec.max_degree - spec.min_degree + 1));
        const int majority = degree / 2 + 1;
        for (int k = 0; k < majority; ++k) connect_to_type(v, intended);
        for (int k = majority; k < degree; ++k) {
            int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(T - 1)));
            if (t >= intended) ++t;
            connect_to_type(v, t);
        }
    }

    // Edges between targets shift both endpoints' histograms, so margins are
    // enforced afterwards. A non-target leader (preferred on ties) gets an
    // extra neighbor of its type; a type-0 leader is paired with another
    // type-0-led target, which only widens both margins.
    auto leader = [&](NodeId v, int* margin) {
        const auto& h = hist[v];
        const int top = *std::max_element(h.begin(), h.end());
        int best = 0;
        for (int t = T - 1; t >= 1; --t)
            if (h[t] == top) best = t;
        int second = 0;
        for (int t = 0; t < T; ++t)
            if (t != best) second = std::max(second, h[t]);
        *margin = h[best] - second;
        return best;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (NodeId v = 0; v < targets; ++v) {
            int margin = 0;
            int t = leader(v, &margin);
            while (margin < spec.min_margin) {
                bool added = false;
                if (t != 0) {
                    const std::size_t before = edges.size();
                    connect_to_type(v, t);
                    added = edges.size() != before;
                } else {
                    for (NodeId u = 0; u < targets && !added; ++u) {
                        int m = 0;
                        if (u != v && leader(u, &m) == 0 && m >= 1) added = connect(v, u);
                    }
                }
                if (!added) throw std::logic_error("synth: cannot reach margin at node " + std::to_string(v));
                changed = true;
                t = leader(v, &margin);
            }
        }
    }

    std::vector<Eigen::MatrixXd> dense(static_cast<std::size_t>(T));
    std::vector<bool> onehot(static_cast<std::size_t>(T), spec.onehot_others);
    onehot[0] = false;
    for (int t = 0; t < T; ++t) {
        if (onehot[t]) continue;
        dense[t].resize(static_cast<Eigen::Index>(members[t].size()), spec.feature_dim);
        for (Eigen::Index k = 0; k < dense[t].size(); ++k) dense[t].data()[k] = rng.normal();
    }
    FeatureTable features(type, T, onehot, std::move(dense));

    Dataset ds;
    ds.info.name = "synthetic";
    ds.info.num_node_types = T;
    ds.info.num_edge_types = T * (T + 1) / 2;
    ds.info.target_type = 0;
    ds.info.num_classes = T;
    ds.info.multilabel = false;
    ds.graph = HeteroGraph::build(n, type, T, ds.info.num_edge_types, std::move(edges), std::move(features));

    ds.labels.num_classes = T;
    ds.labels.multilabel = false;
    ds.labels.labels.assign(static_cast<std::size_t>(n), {});
    for (NodeId v = 0; v < targets; ++v) {
        const int label = dominant_neighbor_type(ds.graph, v);
        if (label < 0) throw std::logic_error("synth: unresolved tie at node " + std::to_string(v));
        ds.labels.labels[v] = {label};
    }

    std::vector<NodeId> order(members[0]);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::lround(targets * spec.train_fraction));
    const auto n_val = static_cast<std::size_t>(std::lround(targets * spec.val_fraction));
    ds.split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    ds.split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) std::sort(part->begin(), part->end());

    for (NodeId v = 0; v < n; ++v) ds.original_ids.push_back(std::to_string(v));
    return ds;
}

Dataset make_fixture()
{
    const std::vector<int> type = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
    const std::vector<std::pair<NodeId, NodeId>> pairs = {{0, 4}, {0, 4}, {0, 7}, {1, 4}, {1, 5}, {1, 2}, {2, 8},
                                                          {2, 9}, {3, 6}, {3, 0}, {4, 7}, {5, 8}, {6, 9}};
    std::vector<Edge> edges;
    for (auto [u, w] : pairs) edges.push_back({u, w, pair_type(type[u], type[w], 3)});

    Rng rng(mix_seed(11, hash_string("fixture")));
    std::vector<Eigen::MatrixXd> dense(3);
    dense[0].resize(4, 4);
    dense[2].resize(3, 3);
    for (int t : {0, 2})
        for (Eigen::Index k = 0; k < dense[t].size(); ++k) dense[t].data()[k] = rng.normal();
    FeatureTable features(type, 3, {false, true, false}, std::move(dense));

    Dataset ds;
    ds.info = {"fixture", 3, 6, 0, 3, false};
    ds.graph = HeteroGraph::build(10, type, 3, 6, std::move(edges), std::move(features));
    ds.labels.num_classes = 3;
    ds.labels.labels.assign(10, {});
    const int label[4] = {0, 1, 2, 1};
    for (NodeId v = 0; v < 4; ++v) ds.labels.labels[v] = {label[v]};
    ds.split.train = {0, 1};
    ds.split.val = {2};
    ds.split.test = {3};
    for (NodeId v = 0; v < 10; ++v) ds.original_ids.push_back(std::to_string(v));
    return ds;
}

} // namespace hinormer
