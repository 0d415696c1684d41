#include "fcnet/error.hpp"
#include "fcnet/representation.hpp"
#include "support/support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace fcnet;

namespace {

ColorRepresentation random_repr(int d_w, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    ColorRepresentation w = ColorRepresentation::zeros(d_w, true);
    for (auto& v : w.vectors) {
        for (auto& x : v) {
            x = n(rng);
        }
    }
    return w;
}

} // namespace

TEST_CASE("empty mask gives the zero sentinel", "[representation]")
{
    torch::manual_seed(1);
    const auto cfg = test::tiny_config();
    ColorEncoder g(cfg.model);
    const auto x = test::random_lab(32, 32, 1);
    ComponentMasks m(32, 32, Component::skin);
    for (int y = 0; y < 8; ++y) {
        for (int xx = 0; xx < 8; ++xx) {
            m.set(y, xx, Component::hair);
        }
    }
    const auto w = encode(x.ab, m, g);
    CHECK(w.d_w == cfg.model.d_w);
    for (auto c : {Component::lips, Component::eyes, Component::background}) {
        CHECK_FALSE(w.present[index_of(c)]);
        for (float v : w.vectors[index_of(c)]) {
            REQUIRE(v == 0.0F);
        }
    }
    CHECK(w.present[index_of(Component::skin)]);
    CHECK(w.present[index_of(Component::hair)]);
}

TEST_CASE("content outside the receptive margin of mask c does not reach vectors[c]", "[representation]")
{
    torch::manual_seed(2);
    const auto cfg = test::tiny_config();
    ColorEncoder g(cfg.model);
    const int margin = g->receptive_margin();
    const int size = 32;
    // Region R: a centred square; mask c = R eroded by the margin.
    BinaryMask region(size * size, 0);
    for (int y = 4; y < 28; ++y) {
        for (int x = 4; x < 28; ++x) {
            region[static_cast<std::size_t>(y) * size + x] = 1;
        }
    }
    const auto inner = erode(region, size, size, margin);
    ComponentMasks m(size, size, Component::background);
    std::size_t inner_count = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] != 0) {
            m.set(static_cast<int>(i / size), static_cast<int>(i % size), Component::lips);
            ++inner_count;
        }
    }
    REQUIRE(inner_count > 0);
    const auto a = test::random_lab(size, size, 10);
    auto b = test::random_lab(size, size, 11);
    for (int ch = 0; ch < 2; ++ch) {
        for (std::size_t i = 0; i < region.size(); ++i) {
            if (region[i] != 0) {
                b.ab.plane(ch)[i] = a.ab.plane(ch)[i];
            }
        }
    }
    const auto wa = encode(a.ab, m, g);
    const auto wb = encode(b.ab, m, g);
    CHECK(wa.vectors[0] == wb.vectors[0]);
    CHECK_FALSE(wa.vectors[4] == wb.vectors[4]);
}

TEST_CASE("encode is deterministic, including achromatic input", "[representation]")
{
    torch::manual_seed(3);
    const auto cfg = test::tiny_config();
    ColorEncoder g(cfg.model);
    const Planes zeros(2, 32, 32, 0.0F);
    const auto m = test::random_masks(32, 32, 3);
    CHECK(encode(zeros, m, g) == encode(zeros, m, g));
    CHECK_THROWS_AS(encode(Planes(2, 16, 16), m, g), ShapeError);
}

TEST_CASE("slice and recombine", "[representation]")
{
    std::array<ColorRepresentation, kNumComponents> src;
    for (std::size_t i = 0; i < kNumComponents; ++i) {
        src[i] = random_repr(32, 100 + i);
    }
    src[2].present[index_of(Component::hair)] = false;
    src[3].present[index_of(Component::hair)] = false;
    src[3].vectors[index_of(Component::hair)].assign(32, 0.0F);
    std::map<Component, ColorRepresentation> parts;
    for (auto c : kAllComponents) {
        parts[c] = src[index_of(c)];
    }
    const auto mixed = recombine(parts);
    for (auto c : kAllComponents) {
        CHECK(slice(mixed, c) == src[index_of(c)].vectors[index_of(c)]);
        CHECK(mixed.present[index_of(c)] == src[index_of(c)].present[index_of(c)]);
    }
    CHECK_FALSE(mixed.present[index_of(Component::hair)]);

    std::map<Component, ColorRepresentation> same;
    for (auto c : kAllComponents) {
        same[c] = src[0];
    }
    CHECK(recombine(same) == src[0]);
    std::map<Component, ColorRepresentation> again;
    for (auto c : kAllComponents) {
        again[c] = mixed;
    }
    CHECK(recombine(again) == mixed);

    const auto zero = ColorRepresentation::zeros(32);
    CHECK(slice(zero, Component::eyes) == std::vector<float>(32, 0.0F));

    parts.erase(Component::eyes);
    CHECK_THROWS_AS(recombine(parts), InvalidArgument);
    parts[Component::eyes] = random_repr(16, 1);
    CHECK_THROWS_AS(recombine(parts), InvalidArgument);
}

TEST_CASE("binary and JSON forms round-trip", "[representation]")
{
    auto w = random_repr(32, 9);
    w.present[1] = false;
    w.vectors[1].assign(32, 0.0F);
    const auto bytes = to_binary(w);
    CHECK(bytes.size() == 645);
    CHECK(bytes[0] == 32);
    CHECK(bytes[644] == 0b11101);
    CHECK(from_binary(bytes) == w);
    CHECK(representation_from_json(to_json(w)) == w);
    CHECK(w.flat().size() == 160);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS(from_binary(truncated));
}

TEST_CASE("batch helpers agree with the single forms", "[representation]")
{
    const auto a = random_repr(8, 1);
    const auto b = random_repr(8, 2);
    const auto batch = to_batch({a, b});
    CHECK(batch.vectors.sizes() == torch::IntArrayRef({2, 5, 8}));
    CHECK(from_batch(batch, 0) == a);
    CHECK(from_batch(batch, 1) == b);
    std::array<RepresentationBatch, kNumComponents> parts{batch, to_batch({b, a}), batch, batch, batch};
    const auto mixed = recombine_batch(parts);
    CHECK(slice(from_batch(mixed, 0), Component::skin) == slice(b, Component::skin));
    CHECK(slice(from_batch(mixed, 0), Component::lips) == slice(a, Component::lips));
}
