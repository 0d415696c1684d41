#pragma once

#include "fcnet/colorspace.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fcnet {

/// Integer label map produced by a face parser.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::int32_t> ids;

    [[nodiscard]] std::int32_t at(int y, int x) const noexcept { return ids[static_cast<std::size_t>(y) * width + x]; }
    bool operator==(const LabelMap&) const = default;
};

RgbImage read_rgb_png(const std::filesystem::path& path);
GrayImage read_gray_png(const std::filesystem::path& path);
LabelMap read_label_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const LabelMap& labels);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
std::vector<std::uint8_t> encode_png(const LabelMap& labels);

/// Decoders accept any image format OpenCV understands. Colour images are
/// converted to RGB; decode_gray converts colour input to luma.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);
GrayImage decode_gray(std::span<const std::uint8_t> bytes);
LabelMap decode_labels(std::span<const std::uint8_t> bytes);

RgbImage resize_area(const RgbImage& image, int height, int width);
GrayImage resize_area(const GrayImage& image, int height, int width);
LabelMap resize_nearest(const LabelMap& labels, int height, int width);

} // namespace fcnet
