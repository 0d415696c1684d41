#pragma once

#include "fcnet/checkpoint.hpp"
#include "fcnet/colorspace.hpp"
#include "fcnet/parsing.hpp"
#include "fcnet/representation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace fcnet {

/// What fills a component slot that no reference was assigned to.
struct FallbackPolicy {
    enum class Kind { automatic, sample, copy };
    Kind kind = Kind::automatic;
    Component copy_from = Component::skin; // Kind::copy only

    /// "auto", "sample" or "copy:<component>".
    static FallbackPolicy parse(std::string_view text);
};

/// Per-component sources for one generation. Components listed in `sampled`
/// are drawn from the flows; the others use their assigned reference
/// representation, or the fallback policy when unassigned.
struct SlotAssignment {
    std::array<std::optional<ColorRepresentation>, kNumComponents> assigned;
    std::array<bool, kNumComponents> sampled{};
    FallbackPolicy fallback;
    std::uint64_t seed = 0;
};

/// Inference over a loaded checkpoint at the checkpoint's image size.
/// Inputs of another size are resized (area for images, nearest for labels).
class Pipeline {
public:
    explicit Pipeline(Checkpoint checkpoint);

    [[nodiscard]] int image_size() const noexcept { return checkpoint_.config.image_size; }
    [[nodiscard]] const Checkpoint& checkpoint() const noexcept { return checkpoint_; }
    [[nodiscard]] const LabelMapping& mapping() const noexcept { return mapping_; }

    [[nodiscard]] RgbImage fit(const RgbImage& image) const;
    [[nodiscard]] GrayImage fit(const GrayImage& image) const;
    [[nodiscard]] LabelMap fit(const LabelMap& labels) const;

    [[nodiscard]] ComponentMasks masks(const LabelMap& labels) const;

    ColorRepresentation encode(const RgbImage& reference, const ComponentMasks& masks);
    LabImage colorize(const Planes& l, const ComponentMasks& masks, const ColorRepresentation& w);
    /// Throws ModelStateError when the checkpoint carries no g_auto.
    ColorRepresentation automatic(const Planes& l, const ComponentMasks& masks);
    /// Throws ModelStateError when the checkpoint carries no trained g_flow.
    ColorRepresentation sample(const Planes& l, const ComponentMasks& masks, std::uint64_t seed,
                               const std::array<bool, kNumComponents>& subset, const ColorRepresentation& fallback);
    /// Resolves every slot to exactly one source and recombines.
    ColorRepresentation resolve(const Planes& l, const ComponentMasks& masks, const SlotAssignment& slots);

private:
    Checkpoint checkpoint_;
    LabelMapping mapping_;
};

} // namespace fcnet
