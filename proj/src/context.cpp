#include "hinormer/context.hpp"

#include "hinormer/random.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace hinormer {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

SamplingPolicy parse_sampling_policy(const std::string& s)
{
    if (s == "deterministic") return SamplingPolicy::Deterministic;
    if (s == "random" || s == "seeded-random") return SamplingPolicy::SeededRandom;
    throw std::invalid_argument("unknown sampling policy '" + s + "'");
}

const char* to_string(SamplingPolicy p)
{
    return p == SamplingPolicy::Deterministic ? "deterministic" : "random";
}

void SamplerConfig::validate() const
{
    if (hops < 0) throw std::invalid_argument("sampler: hops must be >= 0");
    if (seq_len < 1) throw std::invalid_argument("sampler: seq_len must be >= 1");
}

int ContextSequence::valid_count() const
{
    return static_cast<int>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

ContextSequence sample_context(const HeteroGraph& g, NodeId v, const SamplerConfig& cfg)
{
    cfg.validate();
    if (v < 0 || v >= g.num_nodes())
        throw std::out_of_range("sample_context: node " + std::to_string(v) + " outside [0, " +
                                std::to_string(g.num_nodes()) + ")");
    const auto S = static_cast<std::size_t>(cfg.seq_len);

    ContextSequence seq;
    seq.target = v;
    seq.nodes.reserve(S);
    seq.nodes.push_back(v);
    seq.hop.push_back(0);

    std::unordered_set<NodeId> seen{v};
    std::vector<NodeId> frontier{v};
    for (int h = 1; h <= cfg.hops && seq.nodes.size() < S && !frontier.empty(); ++h) {
        std::vector<NodeId> next;
        for (NodeId u : frontier)
            for (const Arc& a : g.neighbors(u))
                if (seen.insert(a.node).second) next.push_back(a.node);
        std::sort(next.begin(), next.end());
        if (cfg.policy == SamplingPolicy::SeededRandom) {
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(h)));
            rng.shuffle(next);
        }
        for (NodeId u : next) {
            if (seq.nodes.size() == S) break;
            seq.nodes.push_back(u);
            seq.hop.push_back(h);
        }
        frontier = std::move(next);
    }
    seq.mask.assign(seq.nodes.size(), 1);
    seq.nodes.resize(S, kPadNode);
    seq.hop.resize(S, 0);
    seq.mask.resize(S, 0);
    return seq;
}

std::vector<ContextSequence> sample_all(const HeteroGraph& g, std::span<const NodeId> ids, const SamplerConfig& cfg)
{
    std::vector<ContextSequence> out;
    out.reserve(ids.size());
    for (NodeId v : ids) {
        try {
            out.push_back(sample_context(g, v, cfg));
        } catch (const std::exception& e) {
            throw std::out_of_range("sample_all: node " + std::to_string(v) + ": " + e.what());
        }
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'H', 'C', 'T', 'X'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
bool get(std::istream& in, T& value)
{
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof value));
}

} // namespace

void write_context_cache(const std::filesystem::path& path, const SamplerConfig& cfg, std::uint64_t graph_checksum,
                         std::span<const ContextSequence> seqs)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write context cache " + path.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, static_cast<std::int32_t>(cfg.seq_len));
    put(out, static_cast<std::int32_t>(cfg.hops));
    put(out, static_cast<std::uint8_t>(cfg.policy));
    put(out, cfg.seed);
    put(out, graph_checksum);
    put(out, static_cast<std::uint64_t>(seqs.size()));
    for (const ContextSequence& s : seqs) {
        if (s.nodes.size() != static_cast<std::size_t>(cfg.seq_len))
            throw std::invalid_argument("write_context_cache: sequence length differs from configuration");
        put(out, static_cast<std::int32_t>(s.target));
        for (NodeId u : s.nodes) put(out, static_cast<std::int32_t>(u));
        for (int h : s.hop) put(out, static_cast<std::int32_t>(h));
        out.write(reinterpret_cast<const char*>(s.mask.data()), static_cast<std::streamsize>(s.mask.size()));
    }
    if (!out) throw std::runtime_error("error writing context cache " + path.string());
}

std::optional<std::vector<ContextSequence>> read_context_cache(const std::filesystem::path& path,
                                                               const SamplerConfig& cfg,
                                                               std::uint64_t graph_checksum)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    std::uint32_t version = 0;
    std::int32_t S = 0, D = 0;
    std::uint8_t policy = 0;
    std::uint64_t seed = 0, checksum = 0, count = 0;
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) return std::nullopt;
    if (!get(in, version) || version != kVersion) return std::nullopt;
    if (!get(in, S) || !get(in, D) || !get(in, policy) || !get(in, seed) || !get(in, checksum) || !get(in, count))
        return std::nullopt;
    if (S != cfg.seq_len || D != cfg.hops || policy != static_cast<std::uint8_t>(cfg.policy) || seed != cfg.seed ||
        checksum != graph_checksum)
        return std::nullopt;

    std::vector<ContextSequence> seqs(count);
    for (ContextSequence& s : seqs) {
        std::int32_t x = 0;
        if (!get(in, x)) return std::nullopt;
        s.target = x;
        s.nodes.resize(S);
        s.hop.resize(S);
        s.mask.resize(S);
        for (auto& u : s.nodes) {
            if (!get(in, x)) return std::nullopt;
            u = x;
        }
        for (auto& h : s.hop) {
            if (!get(in, x)) return std::nullopt;
            h = x;
        }
        if (!in.read(reinterpret_cast<char*>(s.mask.data()), S)) return std::nullopt;
    }
    return seqs;
}

} // namespace hinormer
