#pragma once

#include "fcnet/augment.hpp"
#include "fcnet/model_config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace fcnet {

struct LossWeights {
    double alpha = 1.0;  // l1
    double beta = 0.05;  // perceptual
    double gamma = 1.0;  // cycle
    double auto_image = 0.1; // image-space term of the g_auto objective

    bool operator==(const LossWeights&) const = default;
};

/// Everything a training run needs. Serialised as an INI file:
///
///   [train]     lr_main, lr_aux, batch_main, batch_aux, adam_beta1, adam_beta2,
///               epochs, max_steps, image_size, seed, perceptual, log_every
///   [loss]      alpha, beta, gamma, auto_image
///   [augment]   max_hue, chroma_min, chroma_max, max_rotation, scale_min,
///               scale_max, max_translation, flip_probability
///   [ablation]  grouped_design, chromatic_aug, spatial_aug, repr_branch
///   [model]     d_w, repr_channels, ... (comma-separated integer lists)
///   [data]      root, synthetic_count, synthetic_seed, mapping
struct TrainConfig {
    double lr_main = 5e-5;
    double lr_aux = 1e-3;
    int batch_main = 4;
    int batch_aux = 16;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int epochs = 50;
    /// Hard cap on optimisation steps; 0 means epochs * ceil(N / batch).
    std::int64_t max_steps = 0;
    int image_size = 256;
    std::uint64_t seed = 0;
    /// "identity", "none", or "torchscript:<path>".
    std::string perceptual = "identity";
    int log_every = 10;

    LossWeights loss;
    AugmentationRanges augment;
    ModelConfig model;

    std::filesystem::path data_root;
    /// Use a procedurally generated dataset of this many faces when > 0.
    int synthetic_count = 0;
    std::uint64_t synthetic_seed = 1;
    std::filesystem::path mapping;

    /// Throws ConfigError on non-positive rates/sizes or non-finite weights.
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(const std::string& ini_text);
std::string to_ini(const TrainConfig& config);

/// Small architecture for CPU smoke runs: 32x32 images, two bottleneck
/// stages, narrow layers.
TrainConfig desk_config();

} // namespace fcnet
