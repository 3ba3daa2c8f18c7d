#pragma once

#include "hinormer/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hinormer {

enum class SamplingPolicy : std::uint8_t { Deterministic = 0, SeededRandom = 1 };

SamplingPolicy parse_sampling_policy(const std::string& s);
const char* to_string(SamplingPolicy p);

struct SamplerConfig {
    int hops = 2;    ///< maximum BFS depth D
    int seq_len = 20; ///< fixed sequence length S
    SamplingPolicy policy = SamplingPolicy::Deterministic;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SamplerConfig&) const = default;
};

inline constexpr NodeId kPadNode = -1;

/// Fixed-length context of a target node: hop-major BFS order, then padding.
struct ContextSequence {
    NodeId target = 0;
    std::vector<NodeId> nodes;
    std::vector<int> hop;
    std::vector<std::uint8_t> mask;

    int valid_count() const;
    bool operator==(const ContextSequence&) const = default;
};

/// BFS layers from v are appended hop by hop until S positions are filled or
/// depth D is exhausted. Within a hop the order is ascending node id, or a
/// shuffle seeded by (seed, v, hop) under the random policy.
ContextSequence sample_context(const HeteroGraph& g, NodeId v, const SamplerConfig& cfg);

std::vector<ContextSequence> sample_all(const HeteroGraph& g, std::span<const NodeId> ids, const SamplerConfig& cfg);

/// Binary cache of sampled sequences. Header: magic, version, S, D, policy,
/// seed, graph checksum, record count; then fixed-width records of
/// (target, S node ids, S hops, S mask bytes), little-endian.
void write_context_cache(const std::filesystem::path& path, const SamplerConfig& cfg, std::uint64_t graph_checksum,
                         std::span<const ContextSequence> seqs);

/// Returns nullopt when the file is missing or was written for a different
/// sampler configuration or graph checksum.
std::optional<std::vector<ContextSequence>> read_context_cache(const std::filesystem::path& path,
                                                               const SamplerConfig& cfg,
                                                               std::uint64_t graph_checksum);

} // namespace hinormer
