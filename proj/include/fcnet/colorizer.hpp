#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/model_config.hpp"
#include "fcnet/parsing.hpp"
#include "fcnet/representation.hpp"

#include <torch/torch.h>

#include <vector>

namespace fcnet {

/// Per-pixel affine parameters at the bottleneck; modulated features are
/// gamma * F_l + beta.
struct ModulationMaps {
    torch::Tensor gamma; // [B,C,h,w]
    torch::Tensor beta;  // [B,C,h,w]
};

/// E_Gray output: full-resolution stem features followed by one map per
/// stride-2 stage; the last entry is the bottleneck F_l.
struct GrayFeatures {
    std::vector<torch::Tensor> pyramid;

    [[nodiscard]] const torch::Tensor& bottleneck() const { return pyramid.back(); }
};

/// Spatially-adaptive normalisation: parameter-free instance norm whose
/// scale and shift are convolutions of the (area-downsampled) component masks.
class SpadeImpl : public torch::nn::Module {
public:
    SpadeImpl(int channels, int hidden);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& layout);

private:
    torch::nn::Conv2d shared_{nullptr}, gamma_{nullptr}, beta_{nullptr};
};
TORCH_MODULE(Spade);

class SpadeResBlockImpl : public torch::nn::Module {
public:
    SpadeResBlockImpl(int in_channels, int out_channels, int hidden);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& layout);

private:
    Spade norm0_{nullptr}, norm1_{nullptr}, norm_skip_{nullptr};
    torch::nn::Conv2d conv0_{nullptr}, conv1_{nullptr}, conv_skip_{nullptr};
};
TORCH_MODULE(SpadeResBlock);

/// G_w. Grouped mode broadcasts vectors[c] over the low-resolution support of
/// component c and runs 1x1 group convolutions (one group per component), so
/// every output pixel depends on the vector of its own component only.
/// Dense mode (ablation) feeds the whole representation to every pixel.
class RepresentationDecoderImpl : public torch::nn::Module {
public:
    RepresentationDecoderImpl(const ModelConfig& config, int out_channels);

    /// masks_low: one-hot [B,5,h,w] at bottleneck resolution.
    ModulationMaps forward(const RepresentationBatch& w, const torch::Tensor& masks_low);

    /// vectors with absent components replaced by the learned defaults.
    torch::Tensor effective_vectors(const RepresentationBatch& w) const;

private:
    int d_w_;
    int channels_;
    bool grouped_;
    torch::Tensor default_embedding_; // [5,d_w]
    torch::nn::Conv2d hidden_{nullptr}, out_{nullptr};
};
TORCH_MODULE(RepresentationDecoder);

class GrayEncoderImpl : public torch::nn::Module {
public:
    explicit GrayEncoderImpl(const ModelConfig& config);
    GrayFeatures forward(const torch::Tensor& l_norm);

private:
    torch::nn::Sequential stem_{nullptr};
    std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(GrayEncoder);

/// G: SPADE residual blocks and nearest upsampling from the bottleneck to
/// full resolution with skip connections from E_Gray; emits ab in Lab units.
class ColorDecoderImpl : public torch::nn::Module {
public:
    explicit ColorDecoderImpl(const ModelConfig& config);
    torch::Tensor forward(const torch::Tensor& bottleneck, const GrayFeatures& features, const torch::Tensor& masks);

private:
    std::vector<SpadeResBlock> blocks_;
    std::vector<torch::nn::Conv2d> merges_;
    torch::nn::Conv2d to_ab_{nullptr};
};
TORCH_MODULE(ColorDecoder);

/// Colorization network f = (G_w, E_Gray, G).
class ColorizerImpl : public torch::nn::Module {
public:
    explicit ColorizerImpl(const ModelConfig& config);

    /// l_norm [B,1,H,W], masks one-hot [B,5,H,W]. Returns ab [B,2,H,W] in
    /// [-128,127]. With the representation branch disabled `w` is ignored.
    torch::Tensor forward(const torch::Tensor& l_norm, const RepresentationBatch& w, const torch::Tensor& masks);

    ModulationMaps decode_repr(const RepresentationBatch& w, const torch::Tensor& masks_low);
    GrayFeatures encode_gray(const torch::Tensor& l_norm);

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] bool uses_representation() const noexcept { return config_.repr_branch; }
    RepresentationDecoder& representation_decoder() { return gw_; }

private:
    ModelConfig config_;
    RepresentationDecoder gw_{nullptr};
    GrayEncoder gray_{nullptr};
    ColorDecoder decoder_{nullptr};
};
TORCH_MODULE(Colorizer);

/// Conditional patch discriminator over (l, ab); returns patch logits [B,1,h',w'].
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    explicit PatchDiscriminatorImpl(const ModelConfig& config);
    torch::Tensor forward(const torch::Tensor& l_norm, const torch::Tensor& ab_norm);

private:
    torch::nn::Sequential layers_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// x_hat = f(l, w): the l plane of the result is a bit-identical copy of `l`.
/// Masks are at full resolution; H and W must be multiples of the bottleneck factor.
LabImage generate(const Planes& l, const ColorRepresentation& w, const ComponentMasks& masks, Colorizer& colorizer);

/// Patch logits for a Lab image (no gradients).
torch::Tensor discriminate(const LabImage& x, PatchDiscriminator& discriminator);

} // namespace fcnet
