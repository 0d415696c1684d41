#pragma once

#include <vector>

namespace fcnet {

/// Architecture sizes for every network in the pipeline. Defaults are the
/// full-scale configuration; tests and desk runs shrink them.
struct ModelConfig {
    int d_w = 32;

    // Colour representation branch g: stride-2 stages over ab, per-component MLP head.
    std::vector<int> repr_channels{64, 128, 256, 256};
    int repr_head_hidden = 128;

    // Gray encoder E_Gray: full-resolution stem plus stride-2 stages. The last
    // stage is the bottleneck that receives the affine modulation.
    int gray_stem_channels = 32;
    std::vector<int> gray_channels{64, 128, 256, 256};

    // Representation decoder G_w hidden width per component group.
    int gw_hidden = 64;
    // SPADE mask-embedding width in the decoder G.
    int spade_hidden = 64;

    // Conditional patch discriminator.
    std::vector<int> disc_channels{64, 128, 256, 512};
    std::vector<int> disc_strides{2, 2, 2, 1};

    // No-reference heads.
    int flow_blocks = 4;
    int flow_hidden = 64;
    int flow_context = 32;
    std::vector<int> context_channels{32, 64, 64};
    std::vector<int> auto_channels{64, 128, 256, 256};
    int auto_head_hidden = 128;

    // Ablation switches that change topology.
    bool grouped_design = true;
    bool repr_branch = true;

    /// Spatial reduction between the input and the modulation bottleneck.
    [[nodiscard]] int bottleneck_factor() const noexcept { return 1 << static_cast<int>(gray_channels.size()); }

    bool operator==(const ModelConfig&) const = default;
};

} // namespace fcnet
