#pragma once

#include "hinormer/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hinormer {

/// Contents of the key=value dataset manifest.
struct DatasetInfo {
    std::string name = "dataset";
    int num_node_types = 0;
    int num_edge_types = 0;
    int target_type = 0;
    int num_classes = 0;
    bool multilabel = false;
};

struct LabelSet {
    int num_classes = 0;
    bool multilabel = false;
    /// Per node; empty for unlabeled nodes. Single-label nodes hold one entry.
    std::vector<std::vector<int>> labels;

    bool has_label(NodeId v) const { return !labels[v].empty(); }
    bool operator==(const LabelSet&) const = default;
};

enum class SplitPart { Train, Val, Test };

struct Split {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;

    const std::vector<NodeId>& part(SplitPart p) const;
    bool operator==(const Split&) const = default;
};

SplitPart parse_split_part(const std::string& s);
const char* to_string(SplitPart p);

struct Dataset {
    DatasetInfo info;
    HeteroGraph graph;
    LabelSet labels;
    Split split;
    /// original_ids[v] is the id token used for node v in the input files.
    std::vector<std::string> original_ids;

    std::uint64_t checksum() const;
};

struct DatasetFiles {
    std::filesystem::path nodes;
    std::filesystem::path edges;
    std::filesystem::path labels;
    std::filesystem::path split;
    std::filesystem::path manifest;

    /// nodes.tsv, edges.tsv, labels.tsv, split.tsv, manifest.txt under dir.
    static DatasetFiles in(const std::filesystem::path& dir);
};

DatasetInfo read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetInfo& info, const std::filesystem::path& path);

/// Loads the tab-separated dataset format. Node ids in the files may be any
/// distinct tokens; they are remapped to 0..N-1 in order of appearance in the
/// node file and the mapping kept in Dataset::original_ids.
Dataset load_graph(const DatasetFiles& files);

/// Writes the tab-separated format; load_graph(save) reproduces the dataset.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Reads the HGB benchmark layout (node.dat, link.dat, label.dat,
/// label.dat.test). label.dat is split into train/val by a seeded shuffle.
Dataset load_hgb(const std::filesystem::path& dir, double val_fraction = 0.2, std::uint64_t seed = 0);

/// Dispatches to load_hgb when node.dat is present, otherwise load_graph.
Dataset load_dataset(const std::filesystem::path& dir);

} // namespace hinormer
