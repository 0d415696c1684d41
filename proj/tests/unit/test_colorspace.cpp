#include "fcnet/colorspace.hpp"
#include "fcnet/error.hpp"
#include "support/support.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace fcnet;
using Catch::Approx;

namespace {

RgbImage pixel(int r, int g, int b)
{
    RgbImage img(1, 1);
    img.data = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    return img;
}

} // namespace

TEST_CASE("white and black map to the ends of the L axis", "[colorspace]")
{
    const auto white = rgb_to_lab(pixel(255, 255, 255));
    CHECK(white.l.values[0] == Approx(100.0).margin(1e-3));
    CHECK(std::abs(white.ab.values[0]) < 0.01);
    CHECK(std::abs(white.ab.values[1]) < 0.01);

    const auto black = rgb_to_lab(pixel(0, 0, 0));
    CHECK(black.l.values[0] == Approx(0.0).margin(1e-6));
    CHECK(black.ab.values[0] == Approx(0.0).margin(1e-6));
    CHECK(black.ab.values[1] == Approx(0.0).margin(1e-6));
}

TEST_CASE("mid gray 119 matches the scalar sRGB-XYZ-Lab oracle", "[colorspace]")
{
    const auto lab = rgb_to_lab(pixel(119, 119, 119));
    const auto ref = test::oracle_lab(119, 119, 119);
    CHECK(lab.l.values[0] == Approx(ref.l).margin(1e-3));
    CHECK(std::abs(lab.ab.values[0]) < 0.01);
    CHECK(std::abs(lab.ab.values[1]) < 0.01);
}

TEST_CASE("random colours match the oracle", "[colorspace]")
{
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> d(0, 255);
    for (int i = 0; i < 200; ++i) {
        const int r = d(rng), g = d(rng), b = d(rng);
        const auto lab = rgb_to_lab(pixel(r, g, b));
        const auto ref = test::oracle_lab(r, g, b);
        REQUIRE(lab.l.values[0] == Approx(ref.l).margin(2e-3));
        REQUIRE(lab.ab.values[0] == Approx(ref.a).margin(2e-3));
        REQUIRE(lab.ab.values[1] == Approx(ref.b).margin(2e-3));
    }
}

TEST_CASE("rgb -> lab -> rgb round trip is within one step", "[colorspace]")
{
    RgbImage img(16, 16);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& v : img.data) {
        v = static_cast<std::uint8_t>(d(rng));
    }
    const auto back = lab_to_rgb(rgb_to_lab(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        REQUIRE(std::abs(int(back.data[i]) - int(img.data[i])) <= 1);
    }
}

TEST_CASE("achromatic axis renders neutral gray", "[colorspace]")
{
    LabImage lab{Planes(1, 1, 1, 50.0F), Planes(2, 1, 1, 0.0F)};
    const auto rgb = lab_to_rgb(lab);
    CHECK(std::abs(int(rgb.data[0]) - int(rgb.data[1])) <= 1);
    CHECK(std::abs(int(rgb.data[1]) - int(rgb.data[2])) <= 1);
}

TEST_CASE("out-of-gamut Lab clips without throwing", "[colorspace]")
{
    LabImage lab{Planes(1, 1, 1, 100.0F), Planes(2, 1, 1, 0.0F)};
    lab.ab.values[0] = 100.0F;
    RgbImage rgb;
    REQUIRE_NOTHROW(rgb = lab_to_rgb(lab));
    // Clipped linear RGB: red saturates, green and blue are pulled to the gamut floor.
    double r = 0, g = 0, b = 0;
    lab_to_srgb({100.0, 100.0, 0.0}, r, g, b);
    CHECK(rgb.data[0] == static_cast<std::uint8_t>(std::lround(r * 255.0)));
    CHECK(rgb.data[1] == static_cast<std::uint8_t>(std::lround(g * 255.0)));
    CHECK(rgb.data[2] == static_cast<std::uint8_t>(std::lround(b * 255.0)));
    CHECK(r == Approx(1.0));
}

TEST_CASE("non-finite float input is rejected", "[colorspace]")
{
    std::vector<float> rgb{10.0F, std::numeric_limits<float>::quiet_NaN(), 3.0F};
    CHECK_THROWS_AS(rgb_to_lab(rgb, 1, 1), InvalidArgument);
    std::vector<float> inf{10.0F, 3.0F, std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(rgb_to_lab(inf, 1, 1), InvalidArgument);
}

TEST_CASE("assemble keeps l bit-identical and checks shapes", "[colorspace]")
{
    const auto x = test::random_lab(8, 8, 1);
    CHECK(assemble(x.l, x.ab) == x);
    const auto gray = assemble(x.l, Planes(2, 8, 8, 0.0F));
    CHECK(gray.l == x.l);
    for (float v : gray.ab.values) {
        CHECK(v == 0.0F);
    }
    CHECK_THROWS_AS(assemble(x.l, Planes(2, 4, 8, 0.0F)), ShapeError);
}

TEST_CASE("gray PNG values are read directly as L", "[colorspace]")
{
    GrayImage g{1, 3, {0, 128, 255}};
    const auto l = luminance_from_gray(g);
    CHECK(l.values[0] == 0.0F);
    CHECK(l.values[1] == Approx(128.0 * 100.0 / 255.0));
    CHECK(l.values[2] == Approx(100.0));
    CHECK(gray_from_luminance(l) == g);
}
