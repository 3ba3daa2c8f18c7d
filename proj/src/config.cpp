#include "hinormer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hinormer {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v)
{
    T out{};
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty())
        throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

std::string fmt(double x)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename E, typename Parse>
E parse_enum(const std::string& key, const std::string& v, Parse parse)
{
    try {
        return parse(v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()) + " for key '" + key + "'");
    }
}

struct Field {
    std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define HN_NUM(name, type)                                                                                            \
    {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_number<type>(k, v); }, \
                  [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define HN_REAL(name)                                                                                                 \
    {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_number<double>(k, v); }, \
                  [](const TrainConfig& c) { return fmt(c.name); }}}
#define HN_BOOL(name)                                                                                                 \
    {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_bool(k, v); },         \
                  [](const TrainConfig& c) { return fmt(c.name); }}}
#define HN_ENUM(name, parser)                                                                                         \
    {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) {                                    \
                      c.name = parse_enum<decltype(c.name)>(k, v, [](const std::string& s) { return parser(s); });    \
                  },                                                                                                  \
                  [](const TrainConfig& c) { return std::string(to_string(c.name)); }}}
#define HN_STR(name)                                                                                                  \
    {#name, Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.name = v; },                       \
                  [](const TrainConfig& c) { return c.name; }}}

const std::vector<std::pair<std::string, Field>>& fields()
{
    static const std::vector<std::pair<std::string, Field>> table = {
        HN_REAL(learning_rate),
        HN_REAL(dropout),
        HN_REAL(attention_dropout),
        HN_NUM(epochs, int),
        HN_NUM(patience, int),
        HN_REAL(beta),
        HN_NUM(layers, int),
        HN_NUM(dim, int),
        HN_NUM(heads, int),
        HN_NUM(seq_len, int),
        HN_NUM(hops, int),
        HN_NUM(ks, int),
        HN_NUM(kh, int),
        HN_NUM(seed, std::uint64_t),
        HN_BOOL(multilabel),
        HN_BOOL(no_lse),
        HN_BOOL(no_hre),
        HN_BOOL(use_relational_bias),
        HN_BOOL(freeze_relational),
        HN_ENUM(mechanism, parse_mechanism),
        HN_BOOL(use_ffn),
        HN_NUM(batch_size, int),
        HN_ENUM(structure_encoder, parse_structure_kind),
        HN_BOOL(lse_self_loops),
        HN_ENUM(relation_mode, parse_relation_mode),
        HN_ENUM(sampler, parse_sampling_policy),
        HN_ENUM(loss_reduction, parse_reduction),
        HN_REAL(leaky_slope),
        HN_REAL(ln_eps),
        HN_REAL(adam_beta1),
        HN_REAL(adam_beta2),
        HN_REAL(adam_eps),
        HN_REAL(lr_factor),
        HN_NUM(lr_wait, int),
        HN_REAL(min_lr),
        HN_STR(dataset_dir),
        HN_STR(out_dir),
    };
    return table;
}

#undef HN_NUM
#undef HN_REAL
#undef HN_BOOL
#undef HN_ENUM
#undef HN_STR

const Field& field(const std::string& key)
{
    for (const auto& [k, f] : fields())
        if (k == key) return f;
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

const std::vector<std::string>& TrainConfig::keys()
{
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields()) k.push_back(name);
        return k;
    }();
    return out;
}

void TrainConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, trim(value)); }

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

void TrainConfig::apply_text(const std::string& text, const std::string& origin)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void TrainConfig::apply_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_text(ss.str(), path.string());
}

std::string TrainConfig::to_text() const
{
    std::string out;
    for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
    return out;
}

void TrainConfig::validate() const
{
    auto positive = [](const char* name, double v) {
        if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive("learning_rate", learning_rate);
    positive("layers", layers);
    positive("dim", dim);
    positive("heads", heads);
    positive("seq_len", seq_len);
    positive("patience", patience);
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (hops < 0 || ks < 0 || kh < 0) throw ConfigError("hops, ks and kh must be >= 0");
    if (patience > epochs && epochs > 0) throw ConfigError("patience must not exceed epochs");
    if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (dim % heads != 0) throw ConfigError("dim must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (attention_dropout >= 1.0) throw ConfigError("attention_dropout must be < 1");
    if (use_ffn && mechanism != Mechanism::DotProduct) throw ConfigError("use_ffn requires mechanism = dot");
    if (lr_factor <= 0.0 || lr_factor >= 1.0) throw ConfigError("lr_factor must lie in (0, 1)");
    if (lr_wait < 1) throw ConfigError("lr_wait must be positive");
}

ModelConfig TrainConfig::model_config(int num_classes) const
{
    ModelConfig m;
    m.attention.mechanism = mechanism;
    m.attention.heads = heads;
    m.attention.dim = dim;
    m.attention.beta = beta;
    m.attention.use_relational_bias = use_relational_bias && !no_hre;
    m.attention.use_ffn = use_ffn;
    m.attention.slope = leaky_slope;
    m.attention.ln_eps = ln_eps;
    m.layers = layers;
    m.lse_kind = structure_encoder;
    m.ks = ks;
    m.lse_self_loops = lse_self_loops;
    m.kh = kh;
    m.relation_mode = relation_mode;
    m.no_lse = no_lse;
    m.no_hre = no_hre;
    m.freeze_relational = freeze_relational;
    m.num_classes = num_classes;
    m.feature_dropout = dropout;
    m.attention_dropout = attention_dropout < 0.0 ? dropout : attention_dropout;
    return m;
}

} // namespace hinormer
