#include "fcnet/parsing.hpp"

#include "fcnet/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace fcnet {

std::array<bool, kNumComponents> parse_component_set(std::string_view text)
{
    std::array<bool, kNumComponents> selected{};
    if (text == "all") {
        selected.fill(true);
        return selected;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        const auto name = text.substr(start, end - start);
        if (!name.empty()) {
            const auto c = component_from_string(name);
            if (!c) {
                throw InvalidArgument("unknown component '" + std::string(name) + "'");
            }
            selected[index_of(*c)] = true;
        }
        start = end + 1;
    }
    return selected;
}

ComponentMasks::ComponentMasks(int height, int width, Component fill, int source_label_count)
    : height_(height),
      width_(width),
      source_label_count_(source_label_count),
      owner_(static_cast<std::size_t>(height) * width, static_cast<std::uint8_t>(fill))
{
}

ComponentMasks ComponentMasks::from_binary(const std::array<BinaryMask, kNumComponents>& masks, int height, int width)
{
    const auto n = static_cast<std::size_t>(height) * width;
    for (auto c : kAllComponents) {
        if (masks[index_of(c)].size() != n) {
            throw ShapeError("mask '" + std::string(to_string(c)) + "' does not have " + std::to_string(height) + "x" +
                             std::to_string(width) + " entries");
        }
    }
    ComponentMasks out(height, width);
    for (std::size_t i = 0; i < n; ++i) {
        int owners = 0;
        for (auto c : kAllComponents) {
            const auto v = masks[index_of(c)][i];
            if (v > 1) {
                throw PartitionError("mask values must be 0 or 1");
            }
            if (v == 1) {
                ++owners;
                out.owner_[i] = static_cast<std::uint8_t>(c);
            }
        }
        if (owners != 1) {
            throw PartitionError("pixel (" + std::to_string(i / width) + "," + std::to_string(i % width) + ") belongs to " +
                                 std::to_string(owners) + " components");
        }
    }
    return out;
}

BinaryMask ComponentMasks::mask(Component c) const
{
    BinaryMask out(owner_.size());
    const auto id = static_cast<std::uint8_t>(c);
    std::transform(owner_.begin(), owner_.end(), out.begin(), [id](std::uint8_t o) { return o == id ? 1 : 0; });
    return out;
}

std::size_t ComponentMasks::count(Component c) const noexcept
{
    const auto id = static_cast<std::uint8_t>(c);
    return static_cast<std::size_t>(std::count(owner_.begin(), owner_.end(), id));
}

LabelMapping LabelMapping::celebamask19()
{
    using C = Component;
    return LabelMapping({{0, C::background},
                         {1, C::skin},
                         {2, C::hair},
                         {3, C::hair},
                         {4, C::eyes},
                         {5, C::eyes},
                         {6, C::background},
                         {7, C::skin},
                         {8, C::skin},
                         {9, C::background},
                         {10, C::skin},
                         {11, C::lips},
                         {12, C::lips},
                         {13, C::lips},
                         {14, C::skin},
                         {15, C::background},
                         {16, C::background},
                         {17, C::hair},
                         {18, C::background}});
}

LabelMapping LabelMapping::from_ini(const std::filesystem::path& path)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read label mapping: ") + e.what());
    }
    const auto section = tree.get_child_optional("labels");
    if (!section) {
        throw ConfigError("label mapping '" + path.string() + "' has no [labels] section");
    }
    std::map<int, Component> table;
    for (const auto& [key, value] : *section) {
        int id = 0;
        try {
            id = std::stoi(key);
        } catch (const std::exception&) {
            throw ConfigError("label id '" + key + "' is not an integer");
        }
        const auto c = component_from_string(value.data());
        if (!c) {
            throw ConfigError("label " + key + " maps to unknown component '" + value.data() + "'");
        }
        table[id] = *c;
    }
    return LabelMapping(std::move(table));
}

Component LabelMapping::lookup(int id) const
{
    const auto it = table_.find(id);
    if (it == table_.end()) {
        throw UnknownLabelError(id);
    }
    return it->second;
}

ComponentMasks map_labels(const LabelMap& raw, const LabelMapping& mapping)
{
    if (raw.ids.size() != static_cast<std::size_t>(raw.height) * raw.width) {
        throw ShapeError("label buffer does not match its declared dimensions");
    }
    ComponentMasks out(raw.height, raw.width);
    std::set<int> distinct;
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const int id = raw.at(y, x);
            distinct.insert(id);
            out.set(y, x, mapping.lookup(id));
        }
    }
    out.set_source_label_count(static_cast<int>(distinct.size()));
    return out;
}

ComponentMasks downscale_masks(const ComponentMasks& masks, int factor)
{
    if (factor <= 0 || masks.height() % factor != 0 || masks.width() % factor != 0) {
        throw InvalidArgument("downscale factor " + std::to_string(factor) + " does not divide " +
                              std::to_string(masks.height()) + "x" + std::to_string(masks.width()));
    }
    if (factor == 1) {
        return masks;
    }
    const int h = masks.height() / factor;
    const int w = masks.width() / factor;
    ComponentMasks out(h, w, Component::background, masks.source_label_count());
    for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            std::array<int, kNumComponents> votes{};
            for (int y = cy * factor; y < (cy + 1) * factor; ++y) {
                for (int x = cx * factor; x < (cx + 1) * factor; ++x) {
                    ++votes[index_of(masks.at(y, x))];
                }
            }
            Component best = Component::background;
            for (auto c : kAllComponents) {
                const auto i = index_of(c);
                const auto b = index_of(best);
                if (votes[i] > votes[b] || (votes[i] == votes[b] && kTiePriority[i] > kTiePriority[b])) {
                    best = c;
                }
            }
            out.set(cy, cx, best);
        }
    }
    return out;
}

namespace {

BinaryMask morph(const BinaryMask& mask, int height, int width, int radius, bool dilation)
{
    if (radius <= 0) {
        return mask;
    }
    auto pass = [&](const BinaryMask& in, bool horizontal) {
        BinaryMask out(in.size());
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                std::uint8_t v = dilation ? 0 : 1;
                for (int d = -radius; d <= radius; ++d) {
                    const int yy = horizontal ? y : y + d;
                    const int xx = horizontal ? x + d : x;
                    // Outside the frame counts as "not in mask" for both operations.
                    const bool inside = yy >= 0 && yy < height && xx >= 0 && xx < width;
                    const std::uint8_t s = inside ? in[static_cast<std::size_t>(yy) * width + xx] : 0;
                    v = dilation ? std::max(v, s) : std::min(v, s);
                }
                out[static_cast<std::size_t>(y) * width + x] = v;
            }
        }
        return out;
    };
    return pass(pass(mask, true), false);
}

} // namespace

BinaryMask dilate(const BinaryMask& mask, int height, int width, int radius)
{
    return morph(mask, height, width, radius, true);
}

BinaryMask erode(const BinaryMask& mask, int height, int width, int radius)
{
    return morph(mask, height, width, radius, false);
}

RgbImage render_masks(const ComponentMasks& masks)
{
    static constexpr std::array<std::array<std::uint8_t, 3>, kNumComponents> palette{{
        {{220, 40, 60}},   // lips
        {{240, 190, 150}}, // skin
        {{40, 120, 220}},  // eyes
        {{90, 60, 30}},    // hair
        {{30, 30, 30}},    // background
    }};
    RgbImage out(masks.height(), masks.width());
    for (int y = 0; y < masks.height(); ++y) {
        for (int x = 0; x < masks.width(); ++x) {
            const auto& rgb = palette[index_of(masks.at(y, x))];
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = rgb[c];
            }
        }
    }
    return out;
}

namespace {

struct SplitUrl {
    std::string origin;
    std::string path;
};

SplitUrl split_url(const std::string& url)
{
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) {
        throw ConfigError("parser endpoint '" + url + "' is not an http(s) URL");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

} // namespace

LabelMap fetch_parsing(const RgbImage& image, const ParsingSource& source)
{
    if (source.precomputed) {
        LabelMap labels = read_label_png(*source.precomputed);
        if (labels.height != image.height || labels.width != image.width) {
            throw ShapeError("precomputed label map '" + source.precomputed->string() + "' is " +
                             std::to_string(labels.height) + "x" + std::to_string(labels.width) + " but the image is " +
                             std::to_string(image.height) + "x" + std::to_string(image.width));
        }
        return labels;
    }
    if (!source.endpoint) {
        throw ParserError("no parsing map given and no parser endpoint configured");
    }

    const auto [origin, path] = split_url(source.endpoint->url);
    httplib::Client client(origin);
    const auto timeout = source.endpoint->timeout;
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  static_cast<time_t>((timeout.count() % 1000) * 1000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            static_cast<time_t>((timeout.count() % 1000) * 1000));

    const auto png = encode_png(image);
    const auto response =
        client.Post(path, reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    if (!response) {
        throw ParserError("parser endpoint " + source.endpoint->url + " unreachable: " + httplib::to_string(response.error()));
    }
    if (response->status != 200) {
        throw ParserError("parser endpoint " + source.endpoint->url + " answered HTTP " + std::to_string(response->status));
    }
    const auto& body = response->body;
    LabelMap labels;
    try {
        labels = decode_labels({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
    } catch (const Error& e) {
        throw ParserError(std::string("parser returned an unreadable label map: ") + e.what());
    }
    if (labels.height != image.height || labels.width != image.width) {
        spdlog::warn("parser returned a {}x{} label map for a {}x{} image; resizing with nearest neighbour", labels.height,
                     labels.width, image.height, image.width);
        labels = resize_nearest(labels, image.height, image.width);
    }
    return labels;
}

} // namespace fcnet
