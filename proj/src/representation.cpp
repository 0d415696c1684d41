#include "fcnet/representation.hpp"

#include "fcnet/error.hpp"
#include "fcnet/tensors.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace fcnet {

ColorRepresentation ColorRepresentation::zeros(int d_w, bool present)
{
    ColorRepresentation w;
    w.d_w = d_w;
    for (auto& v : w.vectors) {
        v.assign(static_cast<std::size_t>(d_w), 0.0F);
    }
    w.present.fill(present);
    return w;
}

std::vector<float> ColorRepresentation::flat() const
{
    std::vector<float> out;
    out.reserve(kNumComponents * static_cast<std::size_t>(d_w));
    for (const auto& v : vectors) {
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

std::vector<float> slice(const ColorRepresentation& w, Component c) { return w.vectors[index_of(c)]; }

ColorRepresentation recombine(const std::map<Component, ColorRepresentation>& parts)
{
    ColorRepresentation out;
    for (auto c : kAllComponents) {
        const auto it = parts.find(c);
        if (it == parts.end()) {
            throw InvalidArgument("recombine: no source representation for component '" + std::string(to_string(c)) + "'");
        }
        if (c == Component::lips) {
            out = ColorRepresentation::zeros(it->second.d_w);
        } else if (it->second.d_w != out.d_w) {
            throw InvalidArgument("recombine: representations have different widths");
        }
        out.vectors[index_of(c)] = it->second.vectors[index_of(c)];
        out.present[index_of(c)] = it->second.present[index_of(c)];
    }
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary representation I/O assumes a little-endian host");

// He gain for leaky ReLU with slope 0.2.
const double kGain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));

void validate(const ColorRepresentation& w)
{
    if (w.d_w <= 0) {
        throw InvalidArgument("representation width must be positive");
    }
    for (auto c : kAllComponents) {
        if (w.vectors[index_of(c)].size() != static_cast<std::size_t>(w.d_w)) {
            throw ShapeError("component '" + std::string(to_string(c)) + "' has the wrong width");
        }
    }
}

} // namespace

std::vector<std::uint8_t> to_binary(const ColorRepresentation& w)
{
    validate(w);
    const auto n = kNumComponents * static_cast<std::size_t>(w.d_w);
    std::vector<std::uint8_t> out(4 + n * 4 + 1);
    const auto d = static_cast<std::uint32_t>(w.d_w);
    std::memcpy(out.data(), &d, 4);
    const auto values = w.flat();
    std::memcpy(out.data() + 4, values.data(), n * 4);
    std::uint8_t bits = 0;
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        if (w.present[c]) {
            bits |= static_cast<std::uint8_t>(1U << c);
        }
    }
    out.back() = bits;
    return out;
}

ColorRepresentation from_binary(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4) {
        throw InvalidArgument("binary representation is truncated");
    }
    std::uint32_t d = 0;
    std::memcpy(&d, bytes.data(), 4);
    const auto n = kNumComponents * static_cast<std::size_t>(d);
    if (d == 0 || d > 1U << 16 || bytes.size() != 4 + n * 4 + 1) {
        throw InvalidArgument("binary representation has an inconsistent size");
    }
    auto w = ColorRepresentation::zeros(static_cast<int>(d));
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        std::memcpy(w.vectors[c].data(), bytes.data() + 4 + c * d * 4, d * 4);
    }
    const auto bits = bytes.back();
    if (bits >> kNumComponents) {
        throw InvalidArgument("binary representation has unknown presence bits");
    }
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        w.present[c] = (bits >> c) & 1U;
    }
    return w;
}

nlohmann::json to_json(const ColorRepresentation& w)
{
    validate(w);
    nlohmann::json j;
    j["d_w"] = w.d_w;
    for (auto c : kAllComponents) {
        const std::string name(to_string(c));
        j["vectors"][name] = w.vectors[index_of(c)];
        j["present"][name] = w.present[index_of(c)];
    }
    return j;
}

ColorRepresentation representation_from_json(const nlohmann::json& j)
{
    try {
        auto w = ColorRepresentation::zeros(j.at("d_w").get<int>());
        for (auto c : kAllComponents) {
            const std::string name(to_string(c));
            w.vectors[index_of(c)] = j.at("vectors").at(name).get<std::vector<float>>();
            w.present[index_of(c)] = j.at("present").at(name).get<bool>();
            for (float v : w.vectors[index_of(c)]) {
                if (!std::isfinite(v)) {
                    throw InvalidArgument("representation contains a non-finite value");
                }
            }
        }
        validate(w);
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed representation JSON: ") + e.what());
    }
}

RepresentationBatch to_batch(const std::vector<ColorRepresentation>& items)
{
    if (items.empty()) {
        throw InvalidArgument("cannot batch zero representations");
    }
    const int d_w = items.front().d_w;
    const auto b = static_cast<long>(items.size());
    auto vectors = torch::zeros({b, static_cast<long>(kNumComponents), d_w});
    auto present = torch::zeros({b, static_cast<long>(kNumComponents)});
    auto v_acc = vectors.accessor<float, 3>();
    auto p_acc = present.accessor<float, 2>();
    for (long i = 0; i < b; ++i) {
        const auto& w = items[static_cast<std::size_t>(i)];
        validate(w);
        if (w.d_w != d_w) {
            throw InvalidArgument("cannot batch representations of different widths");
        }
        for (std::size_t c = 0; c < kNumComponents; ++c) {
            for (int k = 0; k < d_w; ++k) {
                v_acc[i][static_cast<long>(c)][k] = w.vectors[c][static_cast<std::size_t>(k)];
            }
            p_acc[i][static_cast<long>(c)] = w.present[c] ? 1.0F : 0.0F;
        }
    }
    return {vectors, present};
}

ColorRepresentation from_batch(const RepresentationBatch& batch, long index)
{
    const auto vectors = batch.vectors[index].detach().to(torch::kFloat32).contiguous();
    const auto present = batch.present[index].detach().to(torch::kFloat32).contiguous();
    const int d_w = static_cast<int>(vectors.size(1));
    auto w = ColorRepresentation::zeros(d_w);
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        const float* row = vectors[static_cast<long>(c)].data_ptr<float>();
        std::copy_n(row, d_w, w.vectors[c].data());
        w.present[c] = present[static_cast<long>(c)].item<float>() > 0.5F;
    }
    return w;
}

RepresentationBatch recombine_batch(const std::array<RepresentationBatch, kNumComponents>& parts)
{
    std::vector<torch::Tensor> vectors;
    std::vector<torch::Tensor> present;
    for (std::size_t c = 0; c < kNumComponents; ++c) {
        vectors.push_back(parts[c].vectors.select(1, static_cast<long>(c)));
        present.push_back(parts[c].present.select(1, static_cast<long>(c)));
    }
    return {torch::stack(vectors, 1), torch::stack(present, 1)};
}

ColorEncoderImpl::ColorEncoderImpl(const ModelConfig& config)
    : d_w_(config.d_w), cell_size_(1 << static_cast<int>(config.repr_channels.size()))
{
    if (config.repr_channels.empty()) {
        throw ConfigError("the representation trunk needs at least one stage");
    }
    trunk_ = torch::nn::Sequential();
    int in = 2;
    for (int out : config.repr_channels) {
        trunk_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1)));
        trunk_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
        in = out;
    }
    register_module("trunk", trunk_);

    const long k = static_cast<long>(kNumComponents);
    const long hidden = config.repr_head_hidden;
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    head_w1_ = register_parameter("head_w1", torch::randn({k, in, hidden}) * (kGain * bound1));
    head_b1_ = register_parameter("head_b1", torch::zeros({k, hidden}));
    head_w2_ = register_parameter("head_w2", torch::randn({k, hidden, config.d_w}) * (kGain * bound2));
    head_b2_ = register_parameter("head_b2", torch::zeros({k, config.d_w}));
    he_initialize(*trunk_);
}

RepresentationBatch ColorEncoderImpl::forward(const torch::Tensor& ab_norm, const torch::Tensor& masks)
{
    if (ab_norm.dim() != 4 || ab_norm.size(1) != 2 || masks.dim() != 4 ||
        masks.size(1) != static_cast<long>(kNumComponents) || ab_norm.size(0) != masks.size(0) ||
        ab_norm.size(2) != masks.size(2) || ab_norm.size(3) != masks.size(3)) {
        throw ShapeError("encode expects ab [B,2,H,W] and masks [B,5,H,W] of the same size");
    }
    if (ab_norm.size(2) % cell_size_ != 0 || ab_norm.size(3) % cell_size_ != 0) {
        throw ShapeError("encode input size must be a multiple of " + std::to_string(cell_size_));
    }
    const auto features = trunk_->forward(ab_norm);                     // [B,C,h,w]
    const auto weights = torch::avg_pool2d(masks, cell_size_);         // [B,5,h,w] area fractions
    const auto mass = weights.sum({2, 3});                              // [B,5]
    const auto present = (masks.sum({2, 3}) > 0).to(features.dtype());  // [B,5]
    const auto pooled = torch::einsum("bkhw,bchw->bkc", {weights, features}) / mass.clamp_min(1e-12).unsqueeze(-1);
    auto hidden = torch::einsum("bkc,kcd->bkd", {pooled, head_w1_}) + head_b1_;
    hidden = torch::leaky_relu(hidden, 0.2);
    auto vectors = torch::einsum("bkd,kde->bke", {hidden, head_w2_}) + head_b2_;
    vectors = vectors * present.unsqueeze(-1);
    return {vectors, present};
}

ColorRepresentation encode(const Planes& ab, const ComponentMasks& masks, ColorEncoder& encoder)
{
    if (ab.channels != 2 || ab.height != masks.height() || ab.width != masks.width()) {
        throw ShapeError("encode: ab planes and masks must share H x W");
    }
    torch::NoGradGuard no_grad;
    const auto dtype = encoder->parameters().front().scalar_type();
    const auto ab_t = normalize_ab(to_tensor(ab)).unsqueeze(0).to(dtype);
    const auto m_t = masks_to_tensor(masks).unsqueeze(0).to(dtype);
    return from_batch(encoder->forward(ab_t, m_t), 0);
}

} // namespace fcnet
