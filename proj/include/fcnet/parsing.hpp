#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/components.hpp"
#include "fcnet/image_io.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fcnet {

/// Binary single-component mask, row-major H x W, values 0/1.
using BinaryMask = std::vector<std::uint8_t>;

/// Partition of an image into the five facial components. Stored as one
/// owning component per pixel so the partition invariant holds by
/// construction; binary masks are derived views.
class ComponentMasks {
public:
    ComponentMasks() = default;

    /// All pixels owned by `fill`.
    ComponentMasks(int height, int width, Component fill = Component::background, int source_label_count = 0);

    /// Validates that the five masks are mutually exclusive and jointly
    /// exhaustive; throws PartitionError otherwise.
    static ComponentMasks from_binary(const std::array<BinaryMask, kNumComponents>& masks, int height, int width);

    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int source_label_count() const noexcept { return source_label_count_; }
    void set_source_label_count(int n) noexcept { source_label_count_ = n; }

    [[nodiscard]] Component at(int y, int x) const noexcept
    {
        return static_cast<Component>(owner_[static_cast<std::size_t>(y) * width_ + x]);
    }
    void set(int y, int x, Component c) noexcept { owner_[static_cast<std::size_t>(y) * width_ + x] = static_cast<std::uint8_t>(c); }

    [[nodiscard]] BinaryMask mask(Component c) const;
    [[nodiscard]] std::size_t count(Component c) const noexcept;
    [[nodiscard]] bool empty(Component c) const noexcept { return count(c) == 0; }
    [[nodiscard]] const std::vector<std::uint8_t>& owners() const noexcept { return owner_; }

    bool operator==(const ComponentMasks& other) const noexcept
    {
        return height_ == other.height_ && width_ == other.width_ && owner_ == other.owner_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int source_label_count_ = 0;
    std::vector<std::uint8_t> owner_;
};

/// Raw parser label id -> component. Must be total over the parser vocabulary.
class LabelMapping {
public:
    LabelMapping() = default;
    explicit LabelMapping(std::map<int, Component> table) : table_(std::move(table)) {}

    /// Default table for 19-class CelebAMask-HQ style parsers (BiSeNet
    /// face-parsing ordering: 0 background, 1 skin, 2/3 brows, 4/5 eyes,
    /// 6 eyeglasses, 7/8 ears, 9 earring, 10 nose, 11 mouth, 12/13 lips,
    /// 14 neck, 15 necklace, 16 cloth, 17 hair, 18 hat).
    static LabelMapping celebamask19();

    /// Reads `id = component` lines of the `[labels]` section of an INI file.
    static LabelMapping from_ini(const std::filesystem::path& path);

    [[nodiscard]] Component lookup(int id) const;
    [[nodiscard]] const std::map<int, Component>& table() const noexcept { return table_; }

private:
    std::map<int, Component> table_;
};

/// Maps a raw label map onto the five-component partition. Throws
/// UnknownLabelError naming the first unmapped id.
ComponentMasks map_labels(const LabelMap& raw, const LabelMapping& mapping);

/// Majority vote over factor x factor cells; ties resolved by kTiePriority.
ComponentMasks downscale_masks(const ComponentMasks& masks, int factor);

/// Chebyshev (square) dilation / erosion of a binary mask by `radius` pixels.
BinaryMask dilate(const BinaryMask& mask, int height, int width, int radius);
BinaryMask erode(const BinaryMask& mask, int height, int width, int radius);

/// Colour-coded RGB rendering of the partition (preview / debugging).
RgbImage render_masks(const ComponentMasks& masks);

/// Where a label map comes from: a precomputed PNG, or a parser service that
/// accepts `POST <url>` with a PNG body and answers with a label PNG.
struct ParserEndpoint {
    std::string url;
    std::chrono::milliseconds timeout{10000};
};

struct ParsingSource {
    std::optional<std::filesystem::path> precomputed;
    std::optional<ParserEndpoint> endpoint;
};

/// Environment variable holding the parser endpoint URL for the CLI.
inline constexpr const char* kParserEndpointEnv = "FCNET_PARSER_ENDPOINT";

/// Precomputed maps are loaded verbatim and must match the image resolution
/// (ShapeError otherwise). Remote maps of a different resolution are
/// nearest-neighbour resized and the resize is logged. Unreachable or failing
/// endpoints raise ParserError; there is no fallback.
LabelMap fetch_parsing(const RgbImage& image, const ParsingSource& source);

} // namespace fcnet
