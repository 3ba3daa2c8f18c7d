#pragma once

#include "hinormer/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hinormer {

struct NamedTensor {
    std::string name;
    Eigen::MatrixXd value;
};

/// Versioned little-endian container: magic "HNRMCKPT", u32 version, then
/// length-prefixed fields in declaration order.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string config_text;
    std::uint64_t dataset_checksum = 0;
    int epoch = 0;      ///< epochs completed
    int best_epoch = 0; ///< epoch whose parameters are stored
    double best_metric = 0.0;
    double lr = 0.0;
    std::vector<NamedTensor> params;
    AdamState adam;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
/// Throws std::runtime_error on a bad magic, unknown version or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace hinormer
