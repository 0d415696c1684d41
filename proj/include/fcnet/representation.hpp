#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/components.hpp"
#include "fcnet/model_config.hpp"
#include "fcnet/parsing.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace fcnet {

/// Latent colour code w: one d_w-wide vector per component. Components with
/// an empty mask in the source carry the all-zero sentinel and present=false.
struct ColorRepresentation {
    int d_w = 0;
    std::array<std::vector<float>, kNumComponents> vectors;
    std::array<bool, kNumComponents> present{};

    static ColorRepresentation zeros(int d_w, bool present = false);

    [[nodiscard]] std::vector<float> flat() const;
    bool operator==(const ColorRepresentation&) const = default;
};

std::vector<float> slice(const ColorRepresentation& w, Component c);

/// Output component c is taken from parts.at(c). Throws InvalidArgument when
/// a component is missing or widths differ.
ColorRepresentation recombine(const std::map<Component, ColorRepresentation>& parts);

/// Binary form: u32 d_w (little endian), 5*d_w float32 (little endian,
/// component order lips, skin, eyes, hair, background), one presence byte
/// with bit c set when component c is present. 645 bytes for d_w = 32.
std::vector<std::uint8_t> to_binary(const ColorRepresentation& w);
ColorRepresentation from_binary(std::span<const std::uint8_t> bytes);

/// Text form: {"d_w":32,"vectors":{"lips":[...],...},"present":{"lips":true,...}}
nlohmann::json to_json(const ColorRepresentation& w);
ColorRepresentation representation_from_json(const nlohmann::json& j);

/// Batched tensor form used inside the networks.
struct RepresentationBatch {
    torch::Tensor vectors; // [B,5,d_w]
    torch::Tensor present; // [B,5], 0/1 floats
};

RepresentationBatch to_batch(const std::vector<ColorRepresentation>& items);
ColorRepresentation from_batch(const RepresentationBatch& batch, long index);

/// Tensor counterpart of recombine(): component c of every sample is taken
/// from parts[c]. All parts must share the batch size.
RepresentationBatch recombine_batch(const std::array<RepresentationBatch, kNumComponents>& parts);

/// Colour representation branch g. A stride-2 convolutional trunk over the ab
/// planes, masked average pooling per component, and a per-component
/// two-layer perceptron head.
class ColorEncoderImpl : public torch::nn::Module {
public:
    explicit ColorEncoderImpl(const ModelConfig& config);

    /// ab_norm: [B,2,H,W] (ab / 128); masks: one-hot [B,5,H,W].
    RepresentationBatch forward(const torch::Tensor& ab_norm, const torch::Tensor& masks);

    /// Side of the square input block pooled into one trunk cell.
    [[nodiscard]] int cell_size() const noexcept { return cell_size_; }

    /// Any pooled cell touching pixel p depends only on input pixels within
    /// this Chebyshev distance of p.
    [[nodiscard]] int receptive_margin() const noexcept { return 2 * cell_size_ - 1; }

    [[nodiscard]] int d_w() const noexcept { return d_w_; }

private:
    int d_w_;
    int cell_size_;
    torch::nn::Sequential trunk_{nullptr};
    torch::Tensor head_w1_, head_b1_, head_w2_, head_b2_;
};
TORCH_MODULE(ColorEncoder);

/// Single-image convenience wrapper around ColorEncoder (no gradients).
ColorRepresentation encode(const Planes& ab, const ComponentMasks& masks, ColorEncoder& encoder);

} // namespace fcnet
