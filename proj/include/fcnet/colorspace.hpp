#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fcnet {

inline constexpr float kLMin = 0.0F;
inline constexpr float kLMax = 100.0F;
inline constexpr float kAbMin = -128.0F;
inline constexpr float kAbMax = 127.0F;

/// Planar (channel-major) float image, laid out C x H x W.
struct Planes {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> values;

    Planes() = default;
    Planes(int c, int h, int w, float fill = 0.0F)
        : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {}

    [[nodiscard]] std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * width; }
    [[nodiscard]] float& at(int c, int y, int x) noexcept { return values[index(c, y, x)]; }
    [[nodiscard]] float at(int c, int y, int x) const noexcept { return values[index(c, y, x)]; }
    [[nodiscard]] std::span<float> plane(int c) noexcept { return {values.data() + c * plane_size(), plane_size()}; }
    [[nodiscard]] std::span<const float> plane(int c) const noexcept
    {
        return {values.data() + c * plane_size(), plane_size()};
    }

    bool operator==(const Planes&) const = default;

private:
    [[nodiscard]] std::size_t index(int c, int y, int x) const noexcept
    {
        return (static_cast<std::size_t>(c) * height + y) * width + x;
    }
};

/// 8-bit sRGB, interleaved RGBRGB...
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    [[nodiscard]] std::uint8_t& at(int y, int x, int c) noexcept { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    [[nodiscard]] std::uint8_t at(int y, int x, int c) const noexcept
    {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool operator==(const RgbImage&) const = default;
};

/// 8-bit single-channel image.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    bool operator==(const GrayImage&) const = default;
};

/// CIE-Lab image with separate luminance (1 x H x W, [0,100]) and chrominance
/// (2 x H x W, a then b, [-128,127]) planes.
struct LabImage {
    Planes l;
    Planes ab;

    [[nodiscard]] int height() const noexcept { return l.height; }
    [[nodiscard]] int width() const noexcept { return l.width; }

    bool operator==(const LabImage&) const = default;
};

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// Scalar sRGB (components in [0,1]) to CIE-Lab, D65 white, 2 degree observer.
Lab srgb_to_lab(double r, double g, double b) noexcept;

/// Scalar CIE-Lab to sRGB in [0,1]; linear RGB is clipped to the gamut before
/// the transfer curve is applied.
void lab_to_srgb(const Lab& lab, double& r, double& g, double& b) noexcept;

LabImage rgb_to_lab(const RgbImage& rgb);

/// Float RGB in [0,255], interleaved. Throws InvalidArgument on non-finite or
/// out-of-range values.
LabImage rgb_to_lab(std::span<const float> rgb, int height, int width);

RgbImage lab_to_rgb(const LabImage& img);

/// Builds a LabImage whose l plane is a bit-identical copy of `l`.
LabImage assemble(const Planes& l, const Planes& ab);

/// Grayscale pixels are read directly as the L channel: L = g * 100 / 255.
Planes luminance_from_gray(const GrayImage& gray);

/// Inverse of luminance_from_gray (rounded, clamped).
GrayImage gray_from_luminance(const Planes& l);

} // namespace fcnet
