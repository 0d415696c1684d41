#pragma once

#include "fcnet/colorizer.hpp"
#include "fcnet/config.hpp"
#include "fcnet/noref.hpp"
#include "fcnet/representation.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace fcnet {

/// Every network of the pipeline. flow and auto_head stay null until their
/// training stage has run.
struct Models {
    ColorEncoder g{nullptr};
    Colorizer f{nullptr};
    PatchDiscriminator d{nullptr};
    FlowSet flow{nullptr};
    AutoHead auto_head{nullptr};

    /// Fresh g, f and D with weights drawn from torch's generator seeded by `seed`.
    static Models create(const ModelConfig& config, std::uint64_t seed);
};

/// A self-describing training snapshot: format version, the full config (as
/// INI text), the step counter, the weights and the optimiser states.
struct Checkpoint {
    static constexpr std::int64_t kFormatVersion = 1;

    TrainConfig config;
    std::int64_t step = 0;
    Models models;
    /// Serialised optimiser states keyed by "main", "disc", "flow", "auto".
    std::map<std::string, std::string> optimizer_states;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Config, step, optimiser state contents and every parameter and buffer
/// compared bit for bit.
bool same_state(const Checkpoint& a, const Checkpoint& b);

/// Lower-case hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

} // namespace fcnet
