#include "fcnet/augment.hpp"

#include "fcnet/error.hpp"
#include "fcnet/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fcnet {

Planes apply_chromatic(const Planes& ab, const ChromaticTransform& t)
{
    if (ab.channels != 2) {
        throw ShapeError("apply_chromatic expects 2 chrominance planes");
    }
    if (t.is_identity()) {
        return ab;
    }
    const double c = std::cos(t.hue_angle) * t.chroma_scale;
    const double s = std::sin(t.hue_angle) * t.chroma_scale;
    Planes out(2, ab.height, ab.width);
    const auto a_in = ab.plane(0);
    const auto b_in = ab.plane(1);
    auto a_out = out.plane(0);
    auto b_out = out.plane(1);
    for (std::size_t i = 0; i < a_in.size(); ++i) {
        const double a = a_in[i];
        const double b = b_in[i];
        a_out[i] = static_cast<float>(std::clamp(c * a - s * b, double{kAbMin}, double{kAbMax}));
        b_out[i] = static_cast<float>(std::clamp(s * a + c * b, double{kAbMin}, double{kAbMax}));
    }
    return out;
}

std::pair<LabImage, ComponentMasks> apply_spatial(const LabImage& img, const ComponentMasks& masks, const SpatialWarp& warp)
{
    const int h = img.height();
    const int w = img.width();
    if (masks.height() != h || masks.width() != w) {
        throw ShapeError("image and masks differ in size");
    }
    if (warp.is_identity()) {
        return {img, masks};
    }

    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double cos_r = std::cos(warp.rotation);
    const double sin_r = std::sin(warp.rotation);
    const double tx = warp.translate_x * w;
    const double ty = warp.translate_y * h;

    LabImage out{Planes(1, h, w, kOutOfFrameL), Planes(2, h, w, 0.0F)};
    ComponentMasks out_masks(h, w, Component::background, masks.source_label_count());

    auto sample = [](const Planes& p, int c, double sx, double sy) {
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0;
        const double fy = sy - y0;
        if (fx == 0.0 && fy == 0.0) {
            return p.at(c, y0, x0);
        }
        const int x1 = std::min(x0 + 1, p.width - 1);
        const int y1 = std::min(y0 + 1, p.height - 1);
        const double top = (1.0 - fx) * p.at(c, y0, x0) + fx * p.at(c, y0, x1);
        const double bottom = (1.0 - fx) * p.at(c, y1, x0) + fx * p.at(c, y1, x1);
        return static_cast<float>((1.0 - fy) * top + fy * bottom);
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse map: undo translation, then scale and rotation about the centre, then the flip.
            const double dx = x - cx - tx;
            const double dy = y - cy - ty;
            double sx = (cos_r * dx + sin_r * dy) / warp.scale + cx;
            const double sy = (-sin_r * dx + cos_r * dy) / warp.scale + cy;
            if (warp.flip) {
                sx = (w - 1) - sx;
            }
            if (sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > h - 1) {
                continue;
            }
            out.l.at(0, y, x) = sample(img.l, 0, sx, sy);
            out.ab.at(0, y, x) = sample(img.ab, 0, sx, sy);
            out.ab.at(1, y, x) = sample(img.ab, 1, sx, sy);
            const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
            const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
            out_masks.set(y, x, masks.at(ny, nx));
        }
    }
    return {std::move(out), std::move(out_masks)};
}

std::pair<ChromaticTransform, SpatialWarp> sample_transforms(std::uint64_t seed, std::size_t ref_index,
                                                             const AugmentationRanges& ranges)
{
    std::mt19937_64 rng(mix_seed(seed, ref_index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    ChromaticTransform chromatic;
    SpatialWarp warp;
    // Draw every value unconditionally so toggling one half does not shift the other.
    const double hue = uniform(-ranges.max_hue, ranges.max_hue);
    const double chroma = uniform(ranges.chroma_min, ranges.chroma_max);
    const bool flip = unit(rng) < ranges.flip_probability;
    const double rotation = uniform(-ranges.max_rotation, ranges.max_rotation);
    const double scale = uniform(ranges.scale_min, ranges.scale_max);
    const double tx = uniform(-ranges.max_translation, ranges.max_translation);
    const double ty = uniform(-ranges.max_translation, ranges.max_translation);
    if (ranges.chromatic) {
        chromatic = {hue, chroma};
    }
    if (ranges.spatial) {
        warp = {flip, rotation, scale, tx, ty};
    }
    return {chromatic, warp};
}

AugmentationBundle make_bundle(const LabImage& x, const ComponentMasks& masks,
                               const std::array<std::pair<ChromaticTransform, SpatialWarp>, kNumComponents>& transforms)
{
    if (masks.height() != x.height() || masks.width() != x.width()) {
        throw ShapeError("image and masks differ in size");
    }
    AugmentationBundle bundle;
    bundle.composite = LabImage{x.l, Planes(2, x.height(), x.width())};

    for (std::size_t i = 0; i < kNumComponents; ++i) {
        const auto& [chromatic, warp] = transforms[i];
        const Planes recoloured = apply_chromatic(x.ab, chromatic);

        auto [image, warped_masks] = apply_spatial(LabImage{x.l, recoloured}, masks, warp);
        bundle.refs[i] = AugmentedReference{std::move(image), std::move(warped_masks), chromatic, warp};

        // The composite stays in the original geometry: only the chromatic part
        // of transform i is used for pixels owned by component i.
        const auto owner = static_cast<std::uint8_t>(AugmentationBundle::assignment(i));
        const auto& owners = masks.owners();
        for (int ch = 0; ch < 2; ++ch) {
            const auto src = recoloured.plane(ch);
            auto dst = bundle.composite.ab.plane(ch);
            for (std::size_t p = 0; p < owners.size(); ++p) {
                if (owners[p] == owner) {
                    dst[p] = src[p];
                }
            }
        }
    }
    return bundle;
}

AugmentationBundle make_bundle(const LabImage& x, const ComponentMasks& masks, std::uint64_t seed,
                               const AugmentationRanges& ranges)
{
    std::array<std::pair<ChromaticTransform, SpatialWarp>, kNumComponents> transforms;
    for (std::size_t i = 0; i < kNumComponents; ++i) {
        transforms[i] = sample_transforms(seed, i, ranges);
    }
    return make_bundle(x, masks, transforms);
}

} // namespace fcnet
