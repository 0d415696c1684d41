#include "fcnet/colorspace.hpp"

#include "fcnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fcnet {
namespace {

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double srgb_to_linear(double v) noexcept
{
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) noexcept
{
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) noexcept
{
    return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

double lab_f_inverse(double f) noexcept
{
    const double cube = f * f * f;
    return cube > kEpsilon ? cube : (116.0 * f - 16.0) / kKappa;
}

std::uint8_t to_byte(double unit) noexcept
{
    return static_cast<std::uint8_t>(std::clamp(std::lround(unit * 255.0), 0L, 255L));
}

void check_same_shape(const Planes& l, const Planes& ab)
{
    if (l.channels != 1 || ab.channels != 2) {
        throw ShapeError("expected a 1-channel l plane and a 2-channel ab plane, got " + std::to_string(l.channels) +
                         " and " + std::to_string(ab.channels));
    }
    if (l.height != ab.height || l.width != ab.width) {
        throw ShapeError("l is " + std::to_string(l.height) + "x" + std::to_string(l.width) + " but ab is " +
                         std::to_string(ab.height) + "x" + std::to_string(ab.width));
    }
}

} // namespace

Lab srgb_to_lab(double r, double g, double b) noexcept
{
    const double rl = srgb_to_linear(r);
    const double gl = srgb_to_linear(g);
    const double bl = srgb_to_linear(b);

    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void lab_to_srgb(const Lab& lab, double& r, double& g, double& b) noexcept
{
    const double fy = (lab.l + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    const double x = kWhiteX * lab_f_inverse(fx);
    const double y = kWhiteY * (lab.l > kKappa * kEpsilon ? fy * fy * fy : lab.l / kKappa);
    const double z = kWhiteZ * lab_f_inverse(fz);

    const double rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    const double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    const double bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;

    r = linear_to_srgb(std::clamp(rl, 0.0, 1.0));
    g = linear_to_srgb(std::clamp(gl, 0.0, 1.0));
    b = linear_to_srgb(std::clamp(bl, 0.0, 1.0));
}

LabImage rgb_to_lab(const RgbImage& rgb)
{
    if (rgb.data.size() != static_cast<std::size_t>(rgb.height) * rgb.width * 3) {
        throw ShapeError("rgb buffer does not match its declared dimensions");
    }
    LabImage out{Planes(1, rgb.height, rgb.width), Planes(2, rgb.height, rgb.width)};
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            const Lab lab = srgb_to_lab(rgb.at(y, x, 0) / 255.0, rgb.at(y, x, 1) / 255.0, rgb.at(y, x, 2) / 255.0);
            out.l.at(0, y, x) = static_cast<float>(std::clamp(lab.l, 0.0, 100.0));
            out.ab.at(0, y, x) = static_cast<float>(std::clamp(lab.a, double{kAbMin}, double{kAbMax}));
            out.ab.at(1, y, x) = static_cast<float>(std::clamp(lab.b, double{kAbMin}, double{kAbMax}));
        }
    }
    return out;
}

LabImage rgb_to_lab(std::span<const float> rgb, int height, int width)
{
    if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("rgb buffer does not match its declared dimensions");
    }
    LabImage out{Planes(1, height, width), Planes(2, height, width)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * width + x) * 3;
            for (int c = 0; c < 3; ++c) {
                const float v = rgb[base + c];
                if (!std::isfinite(v) || v < 0.0F || v > 255.0F) {
                    throw InvalidArgument("rgb value at (" + std::to_string(y) + "," + std::to_string(x) +
                                          ") is not a finite value in [0,255]");
                }
            }
            const Lab lab = srgb_to_lab(rgb[base] / 255.0, rgb[base + 1] / 255.0, rgb[base + 2] / 255.0);
            out.l.at(0, y, x) = static_cast<float>(std::clamp(lab.l, 0.0, 100.0));
            out.ab.at(0, y, x) = static_cast<float>(std::clamp(lab.a, double{kAbMin}, double{kAbMax}));
            out.ab.at(1, y, x) = static_cast<float>(std::clamp(lab.b, double{kAbMin}, double{kAbMax}));
        }
    }
    return out;
}

RgbImage lab_to_rgb(const LabImage& img)
{
    check_same_shape(img.l, img.ab);
    RgbImage out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double r = 0.0;
            double g = 0.0;
            double b = 0.0;
            lab_to_srgb({img.l.at(0, y, x), img.ab.at(0, y, x), img.ab.at(1, y, x)}, r, g, b);
            out.at(y, x, 0) = to_byte(r);
            out.at(y, x, 1) = to_byte(g);
            out.at(y, x, 2) = to_byte(b);
        }
    }
    return out;
}

LabImage assemble(const Planes& l, const Planes& ab)
{
    check_same_shape(l, ab);
    return LabImage{l, ab};
}

Planes luminance_from_gray(const GrayImage& gray)
{
    Planes l(1, gray.height, gray.width);
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        l.values[i] = static_cast<float>(gray.data[i]) * (100.0F / 255.0F);
    }
    return l;
}

GrayImage gray_from_luminance(const Planes& l)
{
    GrayImage gray{l.height, l.width, std::vector<std::uint8_t>(l.plane_size())};
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        gray.data[i] = to_byte(l.values[i] / 100.0);
    }
    return gray;
}

} // namespace fcnet
