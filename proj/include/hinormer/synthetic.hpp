#pragma once

#include "hinormer/dataset.hpp"

#include <cstdint>

namespace hinormer {

/// Parameters of the neighbor-composition benchmark. Type 0 nodes are the
/// labeled targets; their class is the node type that occurs most often among
/// their direct neighbors, so num_classes = num_types.
struct SynthSpec {
    int num_nodes = 300;
    int num_types = 3;
    double target_fraction = 2.0 / 3.0;
    int min_degree = 3;
    int max_degree = 6;
    /// Minimum lead of the winning neighbor type over the runner-up; edges
    /// are added until every target reaches it. 1 only breaks ties.
    int min_margin = 2;
    int feature_dim = 8;
    /// Non-target types get one-hot identity features instead of noise.
    bool onehot_others = false;
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic in (spec, seed). Features are standard Gaussian noise, so the
/// class is recoverable only from graph structure and node types. Edge type
/// encodes the unordered endpoint type pair.
Dataset make_synthetic(const SynthSpec& spec);

/// Fixed 10-node, 3-type graph with mixed dense and one-hot features and
/// four labeled targets, used for gradient checks.
Dataset make_fixture();

/// Class rule applied by the generator: index of the most frequent neighbor
/// type, or -1 on a tie or for an isolated node.
int dominant_neighbor_type(const HeteroGraph& g, NodeId v);

} // namespace hinormer
