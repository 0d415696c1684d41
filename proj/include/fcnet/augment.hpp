#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/components.hpp"
#include "fcnet/parsing.hpp"

#include <array>
#include <cstdint>
#include <numbers>
#include <utility>

namespace fcnet {

/// Rotation of every (a,b) pair about the origin followed by a chroma scale.
/// Never touches luminance.
struct ChromaticTransform {
    double hue_angle = 0.0;    // radians, [-pi, pi]
    double chroma_scale = 1.0; // [0.5, 1.5]

    [[nodiscard]] bool is_identity() const noexcept { return hue_angle == 0.0 && chroma_scale == 1.0; }
    bool operator==(const ChromaticTransform&) const = default;
};

/// Affine warp about the image centre: optional horizontal flip, then
/// rotation and isotropic scale, then translation (fractions of W and H).
struct SpatialWarp {
    bool flip = false;
    double rotation = 0.0; // radians
    double scale = 1.0;
    double translate_x = 0.0; // fraction of width
    double translate_y = 0.0; // fraction of height

    [[nodiscard]] bool is_identity() const noexcept
    {
        return !flip && rotation == 0.0 && scale == 1.0 && translate_x == 0.0 && translate_y == 0.0;
    }
    bool operator==(const SpatialWarp&) const = default;
};

struct AugmentationRanges {
    double max_hue = std::numbers::pi;
    double chroma_min = 0.5;
    double chroma_max = 1.5;
    double max_rotation = std::numbers::pi / 12.0;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double max_translation = 0.05;
    double flip_probability = 0.5;
    bool chromatic = true;
    bool spatial = true;

    bool operator==(const AugmentationRanges&) const = default;
};

struct AugmentedReference {
    LabImage image;
    ComponentMasks masks;
    ChromaticTransform chromatic;
    SpatialWarp warp;
};

/// Five augmented references plus the composite target. Reference i supplies
/// component i of the composite (0 lips, 1 skin, 2 eyes, 3 hair, 4 background).
struct AugmentationBundle {
    std::array<AugmentedReference, kNumComponents> refs;
    LabImage composite;

    static constexpr Component assignment(std::size_t ref_index) noexcept { return static_cast<Component>(ref_index); }
};

/// Luminance value and chrominance given to pixels warped in from outside the frame.
inline constexpr float kOutOfFrameL = 50.0F;

Planes apply_chromatic(const Planes& ab, const ChromaticTransform& t);

/// Bilinear resampling for image planes, nearest neighbour for masks.
/// Out-of-frame pixels become background with l = 50, ab = 0.
std::pair<LabImage, ComponentMasks> apply_spatial(const LabImage& img, const ComponentMasks& masks, const SpatialWarp& warp);

/// Samples a transform pair for one reference. Disabled halves of `ranges`
/// yield identity transforms.
std::pair<ChromaticTransform, SpatialWarp> sample_transforms(std::uint64_t seed, std::size_t ref_index,
                                                             const AugmentationRanges& ranges);

/// Builds the bundle with explicit transforms.
AugmentationBundle make_bundle(const LabImage& x, const ComponentMasks& masks,
                               const std::array<std::pair<ChromaticTransform, SpatialWarp>, kNumComponents>& transforms);

/// Seeded variant: same seed -> identical bundle.
AugmentationBundle make_bundle(const LabImage& x, const ComponentMasks& masks, std::uint64_t seed,
                               const AugmentationRanges& ranges = {});

} // namespace fcnet
