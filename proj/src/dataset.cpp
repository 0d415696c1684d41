#include "fcnet/dataset.hpp"

#include "fcnet/error.hpp"
#include "fcnet/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace fcnet {
namespace {

struct Ellipse {
    double cx, cy, rx, ry;

    [[nodiscard]] double distance(double u, double v) const noexcept
    {
        const double du = (u - cx) / rx;
        const double dv = (v - cy) / ry;
        return du * du + dv * dv;
    }
    [[nodiscard]] bool contains(double u, double v) const noexcept { return distance(u, v) <= 1.0; }
};

Lab random_chroma(std::mt19937_64& rng, double l_lo, double l_hi, double c_lo, double c_hi)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double hue = 2.0 * std::numbers::pi * unit(rng);
    const double chroma = c_lo + (c_hi - c_lo) * unit(rng);
    return {l_lo + (l_hi - l_lo) * unit(rng), chroma * std::cos(hue), chroma * std::sin(hue)};
}

Lab jitter(std::mt19937_64& rng, Lab base, double amount)
{
    std::uniform_real_distribution<double> d(-amount, amount);
    return {std::clamp(base.l + d(rng), 5.0, 95.0), base.a + d(rng), base.b + d(rng)};
}

} // namespace

SyntheticFace make_synthetic_face(int size, std::uint64_t seed)
{
    std::mt19937_64 rng(mix_seed(seed, 0xFACE));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    // Component colours.
    const Lab background = random_chroma(rng, 25.0, 85.0, 5.0, 60.0);
    static constexpr std::array<Lab, 5> hair_palette{{{15, 2, 3}, {32, 12, 24}, {70, 4, 38}, {45, 38, 44}, {55, 0, 0}}};
    Lab hair = unit(rng) < 0.75 ? jitter(rng, hair_palette[static_cast<std::size_t>(unit(rng) * 5) % 5], 6.0)
                                : random_chroma(rng, 30.0, 70.0, 25.0, 55.0);
    const Lab skin{uniform(45.0, 80.0), uniform(6.0, 24.0), uniform(10.0, 32.0)};
    static constexpr std::array<Lab, 4> eye_palette{{{30, 8, 25}, {50, -8, -30}, {45, -25, 15}, {35, 15, 30}}};
    const Lab eyes = jitter(rng, eye_palette[static_cast<std::size_t>(unit(rng) * 4) % 4], 6.0);
    const Lab lips{uniform(35.0, 60.0), uniform(28.0, 58.0), uniform(5.0, 30.0)};

    // Geometry in unit coordinates, with a small random pose.
    const double ox = uniform(-0.04, 0.04);
    const double oy = uniform(-0.03, 0.03);
    const double s = uniform(0.92, 1.08);
    auto at = [&](double cx, double cy, double rx, double ry) {
        return Ellipse{0.5 + (cx - 0.5) * s + ox, 0.5 + (cy - 0.5) * s + oy, rx * s, ry * s};
    };
    const Ellipse hair_region = at(0.5, 0.43, 0.37, 0.40);
    const Ellipse face = at(0.5, 0.56, 0.27, 0.32);
    const Ellipse eye_l = at(0.39, 0.50, 0.075, 0.045);
    const Ellipse eye_r = at(0.61, 0.50, 0.075, 0.045);
    const Ellipse brow_l = at(0.39, 0.43, 0.08, 0.022);
    const Ellipse brow_r = at(0.61, 0.43, 0.08, 0.022);
    const Ellipse nose = at(0.5, 0.62, 0.045, 0.06);
    const Ellipse upper_lip = at(0.5, 0.745, 0.13, 0.04);
    const Ellipse lower_lip = at(0.5, 0.795, 0.13, 0.045);
    const Ellipse mouth = at(0.5, 0.77, 0.11, 0.012);
    const double neck_left = 0.5 + (0.42 - 0.5) * s + ox;
    const double neck_right = 0.5 + (0.58 - 0.5) * s + ox;
    const double neck_top = face.cy;

    SyntheticFace out{RgbImage(size, size), LabelMap{size, size, std::vector<std::int32_t>(static_cast<std::size_t>(size) * size)}};
    std::normal_distribution<double> noise(0.0, 1.2);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size;
            const double v = (y + 0.5) / size;
            int label = 0;
            Lab colour = background;
            colour.l += (0.5 - v) * 12.0;
            if (hair_region.contains(u, v) && v < face.cy + 0.15) {
                label = 17;
                colour = hair;
            }
            if (u > neck_left && u < neck_right && v > neck_top) {
                label = 14;
                colour = skin;
                colour.l -= 8.0;
            }
            if (face.contains(u, v)) {
                label = 1;
                colour = skin;
                colour.l += 6.0 * (1.0 - face.distance(u, v));
            }
            if (nose.contains(u, v)) {
                label = 10;
                colour = skin;
                colour.l -= 4.0;
            }
            if (brow_l.contains(u, v) || brow_r.contains(u, v)) {
                label = brow_l.contains(u, v) ? 2 : 3;
                colour = hair;
            }
            if (eye_l.contains(u, v) || eye_r.contains(u, v)) {
                label = eye_l.contains(u, v) ? 4 : 5;
                colour = eyes;
            }
            if (upper_lip.contains(u, v)) {
                label = 12;
                colour = lips;
            }
            if (lower_lip.contains(u, v)) {
                label = 13;
                colour = lips;
                colour.l += 3.0;
            }
            if (mouth.contains(u, v)) {
                label = 11;
                colour = lips;
                colour.l -= 10.0;
            }
            colour.l = std::clamp(colour.l + noise(rng), 2.0, 98.0);
            double r = 0.0;
            double g = 0.0;
            double b = 0.0;
            lab_to_srgb(colour, r, g, b);
            out.image.at(y, x, 0) = static_cast<std::uint8_t>(std::lround(r * 255.0));
            out.image.at(y, x, 1) = static_cast<std::uint8_t>(std::lround(g * 255.0));
            out.image.at(y, x, 2) = static_cast<std::uint8_t>(std::lround(b * 255.0));
            out.labels.ids[static_cast<std::size_t>(y) * size + x] = label;
        }
    }
    return out;
}

Dataset Dataset::from_directory(const std::filesystem::path& root, const LabelMapping& mapping, int image_size)
{
    const auto images = root / "images";
    const auto parsing = root / "parsing";
    if (!std::filesystem::is_directory(images)) {
        throw IoError("dataset '" + root.string() + "' has no images/ directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(images)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Sample> samples;
    samples.reserve(files.size());
    for (const auto& file : files) {
        const auto stem = file.stem().string();
        const auto label_path = parsing / (stem + ".png");
        if (!std::filesystem::exists(label_path)) {
            throw IoError("image '" + file.string() + "' has no parsing map at '" + label_path.string() + "'");
        }
        const auto rgb = resize_area(read_rgb_png(file), image_size, image_size);
        const auto labels = resize_nearest(read_label_png(label_path), image_size, image_size);
        samples.push_back({stem, rgb_to_lab(rgb), map_labels(labels, mapping)});
    }
    if (samples.empty()) {
        throw IoError("dataset '" + root.string() + "' contains no PNG images");
    }
    return Dataset(std::move(samples));
}

Dataset Dataset::synthetic(int count, int image_size, std::uint64_t seed, const LabelMapping& mapping)
{
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const auto face = make_synthetic_face(image_size, mix_seed(seed, static_cast<std::uint64_t>(i)));
        samples.push_back({"synthetic_" + std::to_string(i), rgb_to_lab(face.image), map_labels(face.labels, mapping)});
    }
    return Dataset(std::move(samples));
}

LabelMapping load_mapping(const TrainConfig& config)
{
    return config.mapping.empty() ? LabelMapping::celebamask19() : LabelMapping::from_ini(config.mapping);
}

Dataset load_dataset(const TrainConfig& config)
{
    const auto mapping = load_mapping(config);
    if (config.synthetic_count > 0) {
        return Dataset::synthetic(config.synthetic_count, config.image_size, config.synthetic_seed, mapping);
    }
    if (config.data_root.empty()) {
        throw ConfigError("data.root is empty and data.synthetic_count is 0");
    }
    return Dataset::from_directory(config.data_root, mapping, config.image_size);
}

void write_synthetic_dataset(const std::filesystem::path& root, int count, int image_size, std::uint64_t seed)
{
    for (int i = 0; i < count; ++i) {
        const auto face = make_synthetic_face(image_size, mix_seed(seed, static_cast<std::uint64_t>(i)));
        char stem[32];
        std::snprintf(stem, sizeof(stem), "face_%05d", i);
        write_png(root / "images" / (std::string(stem) + ".png"), face.image);
        write_png(root / "parsing" / (std::string(stem) + ".png"), face.labels);
    }
}

} // namespace fcnet
