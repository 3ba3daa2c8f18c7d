#pragma once

#include "hinormer/context.hpp"
#include "hinormer/losses.hpp"
#include "hinormer/model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace hinormer {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every tunable of a training run. Text form is flat `key = value` lines
/// using the field names below; `#` starts a comment.
struct TrainConfig {
    double learning_rate = 1e-4;
    double dropout = 0.5;
    double attention_dropout = -1.0; ///< negative: same as dropout
    int epochs = 300;
    int patience = 50;
    double beta = 1.0;
    int layers = 2;
    int dim = 256;
    int heads = 2;
    int seq_len = 20;
    int hops = 2;
    int ks = 3;
    int kh = 3;
    std::uint64_t seed = 0;
    bool multilabel = false;
    bool no_lse = false;
    bool no_hre = false;
    bool use_relational_bias = true;
    bool freeze_relational = false;
    Mechanism mechanism = Mechanism::GATv2;
    bool use_ffn = false;
    int batch_size = 0; ///< 0: full batch
    StructureKind structure_encoder = StructureKind::AdjPower;
    bool lse_self_loops = false;
    RelationMode relation_mode = RelationMode::Normalized;
    SamplingPolicy sampler = SamplingPolicy::Deterministic;
    Reduction loss_reduction = Reduction::Mean;
    double leaky_slope = 0.2;
    double ln_eps = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_factor = 0.5;
    int lr_wait = 10;
    double min_lr = 1e-6;
    std::string dataset_dir;
    std::string out_dir;

    /// Sets one field from its text form. Unknown keys and malformed values
    /// raise ConfigError.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    /// Overlays `key = value` lines; `origin` prefixes error messages.
    void apply_text(const std::string& text, const std::string& origin = "config");
    void apply_file(const std::filesystem::path& path);

    /// Canonical text with every key, in a fixed order.
    std::string to_text() const;

    void validate() const;

    ModelConfig model_config(int num_classes) const;

    static const std::vector<std::string>& keys();
};

} // namespace hinormer
