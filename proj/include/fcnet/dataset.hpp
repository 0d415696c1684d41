#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/config.hpp"
#include "fcnet/image_io.hpp"
#include "fcnet/parsing.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fcnet {

struct Sample {
    std::string name;
    LabImage image;
    ComponentMasks masks;
};

/// Procedural "face": coloured background, hair, skin (face, nose, neck),
/// eyes, brows and lips drawn as ellipses with per-component colours and
/// mild luminance shading. Labels use the CelebAMask-19 ids.
struct SyntheticFace {
    RgbImage image;
    LabelMap labels;
};

SyntheticFace make_synthetic_face(int size, std::uint64_t seed);

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}

    /// `images/<stem>.png` paired with `parsing/<stem>.png`, both resized to
    /// image_size (area for colour, nearest for labels). Images without a
    /// parsing map raise IoError.
    static Dataset from_directory(const std::filesystem::path& root, const LabelMapping& mapping, int image_size);

    static Dataset synthetic(int count, int image_size, std::uint64_t seed, const LabelMapping& mapping);

    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }
    [[nodiscard]] const Sample& operator[](std::size_t i) const { return samples_.at(i); }
    [[nodiscard]] const std::vector<Sample>& samples() const noexcept { return samples_; }

private:
    std::vector<Sample> samples_;
};

/// Chooses between the synthetic generator and a directory per the config.
Dataset load_dataset(const TrainConfig& config);

/// Label mapping from config (CelebAMask-19 default when unset).
LabelMapping load_mapping(const TrainConfig& config);

/// Writes `images/` and `parsing/` PNGs for `count` synthetic faces.
void write_synthetic_dataset(const std::filesystem::path& root, int count, int image_size, std::uint64_t seed);

} // namespace fcnet
