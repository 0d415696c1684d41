#include "fcnet/colorizer.hpp"

#include "fcnet/error.hpp"
#include "fcnet/tensors.hpp"

namespace fcnet {
namespace {

constexpr double kSlope = 0.2;
constexpr long kComponents = static_cast<long>(kNumComponents);

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1, int groups = 1, bool bias = true)
{
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).groups(groups).bias(bias));
}

torch::nn::Sequential conv_block(int in, int out, int stride)
{
    return torch::nn::Sequential(conv(in, out, 3, stride), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
}

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kSlope); }

torch::Tensor layout_at(const torch::Tensor& masks, long height)
{
    const long factor = masks.size(2) / height;
    return factor == 1 ? masks : torch::avg_pool2d(masks, factor);
}

} // namespace

SpadeImpl::SpadeImpl(int channels, int hidden)
    : shared_(register_module("shared", conv(kComponents, hidden, 3))),
      gamma_(register_module("gamma", conv(hidden, channels, 3))),
      beta_(register_module("beta", conv(hidden, channels, 3)))
{
}

torch::Tensor SpadeImpl::forward(const torch::Tensor& x, const torch::Tensor& layout)
{
    const auto normalized = torch::instance_norm(x, {}, {}, {}, {}, /*use_input_stats=*/true, 0.0, 1e-5, false);
    const auto actv = torch::relu(shared_->forward(layout));
    return normalized * (1.0 + gamma_->forward(actv)) + beta_->forward(actv);
}

SpadeResBlockImpl::SpadeResBlockImpl(int in_channels, int out_channels, int hidden)
{
    const int mid = std::min(in_channels, out_channels);
    norm0_ = register_module("norm0", Spade(in_channels, hidden));
    conv0_ = register_module("conv0", conv(in_channels, mid, 3));
    norm1_ = register_module("norm1", Spade(mid, hidden));
    conv1_ = register_module("conv1", conv(mid, out_channels, 3));
    if (in_channels != out_channels) {
        norm_skip_ = register_module("norm_skip", Spade(in_channels, hidden));
        conv_skip_ = register_module("conv_skip", conv(in_channels, out_channels, 1, 1, 1, false));
    }
}

torch::Tensor SpadeResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& layout)
{
    const auto shortcut = conv_skip_ ? conv_skip_->forward(norm_skip_->forward(x, layout)) : x;
    auto h = conv0_->forward(lrelu(norm0_->forward(x, layout)));
    h = conv1_->forward(lrelu(norm1_->forward(h, layout)));
    return shortcut + h;
}

RepresentationDecoderImpl::RepresentationDecoderImpl(const ModelConfig& config, int out_channels)
    : d_w_(config.d_w), channels_(out_channels), grouped_(config.grouped_design)
{
    default_embedding_ = register_parameter("default_embedding", torch::randn({kComponents, config.d_w}) * 0.02);
    const int hidden = config.gw_hidden * static_cast<int>(kComponents);
    if (grouped_) {
        hidden_ = register_module("hidden", conv(kComponents * d_w_, hidden, 1, 1, kComponents));
        out_ = register_module("out", conv(hidden, kComponents * 2 * out_channels, 1, 1, kComponents));
    } else {
        hidden_ = register_module("hidden", conv(kComponents * d_w_ + kComponents, hidden, 1));
        out_ = register_module("out", conv(hidden, 2 * out_channels, 1));
    }
    he_initialize(*this);
}

torch::Tensor RepresentationDecoderImpl::effective_vectors(const RepresentationBatch& w) const
{
    const auto present = w.present.unsqueeze(-1);
    return present * w.vectors + (1.0 - present) * default_embedding_.unsqueeze(0);
}

ModulationMaps RepresentationDecoderImpl::forward(const RepresentationBatch& w, const torch::Tensor& masks_low)
{
    if (w.vectors.dim() != 3 || w.vectors.size(1) != kComponents || w.vectors.size(2) != d_w_) {
        throw ShapeError("G_w expects vectors of shape [B,5," + std::to_string(d_w_) + "]");
    }
    if (masks_low.dim() != 4 || masks_low.size(1) != kComponents || masks_low.size(0) != w.vectors.size(0)) {
        throw ShapeError("G_w expects low-resolution masks of shape [B,5,h,w]");
    }
    const long b = masks_low.size(0);
    const long h = masks_low.size(2);
    const long wd = masks_low.size(3);
    const auto vectors = effective_vectors(w); // [B,5,d]

    torch::Tensor params;
    if (grouped_) {
        // [B,5,d,1,1] * [B,5,1,h,w] -> per-component layout, zero outside each support.
        const auto layout = (vectors.unsqueeze(-1).unsqueeze(-1) * masks_low.unsqueeze(2)).reshape({b, kComponents * d_w_, h, wd});
        auto per_group = out_->forward(lrelu(hidden_->forward(layout))); // [B,5*2C,h,w]
        per_group = per_group.view({b, kComponents, 2 * channels_, h, wd});
        // Keep only each pixel's own group.
        params = (per_group * masks_low.unsqueeze(2)).sum(1);
    } else {
        const auto flat = vectors.reshape({b, kComponents * d_w_, 1, 1}).expand({b, kComponents * d_w_, h, wd});
        params = out_->forward(lrelu(hidden_->forward(torch::cat({flat, masks_low}, 1))));
    }
    auto chunks = params.chunk(2, 1);
    return {1.0 + chunks[0], chunks[1]};
}

GrayEncoderImpl::GrayEncoderImpl(const ModelConfig& config)
{
    stem_ = register_module("stem", conv_block(1, config.gray_stem_channels, 1));
    int in = config.gray_stem_channels;
    for (std::size_t i = 0; i < config.gray_channels.size(); ++i) {
        const int out = config.gray_channels[i];
        auto stage = torch::nn::Sequential(conv(in, out, 3, 2), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)),
                                           conv(out, out, 3, 1), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
        stages_.push_back(register_module("stage" + std::to_string(i), stage));
        in = out;
    }
    he_initialize(*this);
}

GrayFeatures GrayEncoderImpl::forward(const torch::Tensor& l_norm)
{
    if (l_norm.dim() != 4 || l_norm.size(1) != 1) {
        throw ShapeError("E_Gray expects l of shape [B,1,H,W]");
    }
    const long factor = 1L << stages_.size();
    if (l_norm.size(2) % factor != 0 || l_norm.size(3) % factor != 0) {
        throw ShapeError("E_Gray input size must be a multiple of " + std::to_string(factor));
    }
    GrayFeatures out;
    auto x = stem_->forward(l_norm);
    out.pyramid.push_back(x);
    for (auto& stage : stages_) {
        x = stage->forward(x);
        out.pyramid.push_back(x);
    }
    return out;
}

ColorDecoderImpl::ColorDecoderImpl(const ModelConfig& config)
{
    const auto& ch = config.gray_channels;
    for (std::size_t i = ch.size(); i-- > 0;) {
        const int here = ch[i];
        const int skip = i == 0 ? config.gray_stem_channels : ch[i - 1];
        blocks_.push_back(register_module("block" + std::to_string(i), SpadeResBlock(here, here, config.spade_hidden)));
        merges_.push_back(register_module("merge" + std::to_string(i), conv(here + skip, skip, 3)));
    }
    to_ab_ = register_module("to_ab", conv(config.gray_stem_channels, 2, 3));
    he_initialize(*this);
    // Near-zero chrominance at initialisation.
    torch::NoGradGuard no_grad;
    to_ab_->weight.mul_(0.01);
}

torch::Tensor ColorDecoderImpl::forward(const torch::Tensor& bottleneck, const GrayFeatures& features, const torch::Tensor& masks)
{
    auto x = bottleneck;
    const auto levels = features.pyramid.size();
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        x = blocks_[k]->forward(x, layout_at(masks, x.size(2)));
        x = torch::upsample_nearest2d(x, {x.size(2) * 2, x.size(3) * 2});
        const auto& skip = features.pyramid[levels - 2 - k];
        x = lrelu(merges_[k]->forward(torch::cat({x, skip}, 1)));
    }
    return (torch::tanh(to_ab_->forward(x)) * kAbScale).clamp(kAbMin, kAbMax);
}

ColorizerImpl::ColorizerImpl(const ModelConfig& config) : config_(config)
{
    if (config.gray_channels.empty()) {
        throw ConfigError("E_Gray needs at least one stage");
    }
    if (config.repr_branch) {
        gw_ = register_module("gw", RepresentationDecoder(config, config.gray_channels.back()));
    }
    gray_ = register_module("gray", GrayEncoder(config));
    decoder_ = register_module("decoder", ColorDecoder(config));
}

ModulationMaps ColorizerImpl::decode_repr(const RepresentationBatch& w, const torch::Tensor& masks_low)
{
    if (!gw_) {
        throw ModelStateError("the representation branch is disabled in this model");
    }
    return gw_->forward(w, masks_low);
}

GrayFeatures ColorizerImpl::encode_gray(const torch::Tensor& l_norm) { return gray_->forward(l_norm); }

torch::Tensor ColorizerImpl::forward(const torch::Tensor& l_norm, const RepresentationBatch& w, const torch::Tensor& masks)
{
    if (masks.dim() != 4 || masks.size(1) != kComponents || masks.size(0) != l_norm.size(0) ||
        masks.size(2) != l_norm.size(2) || masks.size(3) != l_norm.size(3)) {
        throw ShapeError("generate expects masks [B,5,H,W] matching l [B,1,H,W]");
    }
    const auto features = gray_->forward(l_norm);
    auto bottleneck = features.bottleneck();
    if (gw_) {
        const auto masks_low = downscale_mask_tensor(masks, config_.bottleneck_factor());
        const auto mod = gw_->forward(w, masks_low);
        bottleneck = mod.gamma * bottleneck + mod.beta;
    }
    return decoder_->forward(bottleneck, features, masks);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const ModelConfig& config)
{
    if (config.disc_channels.size() != config.disc_strides.size() || config.disc_channels.empty()) {
        throw ConfigError("discriminator channels and strides must be non-empty and of equal length");
    }
    layers_ = torch::nn::Sequential();
    int in = 3;
    for (std::size_t i = 0; i < config.disc_channels.size(); ++i) {
        const int out = config.disc_channels[i];
        layers_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(config.disc_strides[i]).padding(1)));
        layers_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope)));
        in = out;
    }
    layers_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 4).stride(1).padding(1)));
    register_module("layers", layers_);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& l_norm, const torch::Tensor& ab_norm)
{
    if (l_norm.dim() != 4 || ab_norm.dim() != 4 || l_norm.size(1) != 1 || ab_norm.size(1) != 2) {
        throw ShapeError("discriminator expects l [B,1,H,W] and ab [B,2,H,W]");
    }
    return layers_->forward(torch::cat({l_norm, ab_norm}, 1));
}

LabImage generate(const Planes& l, const ColorRepresentation& w, const ComponentMasks& masks, Colorizer& colorizer)
{
    if (l.channels != 1 || l.height != masks.height() || l.width != masks.width()) {
        throw ShapeError("generate: l plane and masks must share H x W");
    }
    torch::NoGradGuard no_grad;
    const auto dtype = colorizer->parameters().front().scalar_type();
    const auto l_t = normalize_l(to_tensor(l)).unsqueeze(0).to(dtype);
    const auto m_t = masks_to_tensor(masks).unsqueeze(0).to(dtype);
    auto batch = to_batch({w});
    batch.vectors = batch.vectors.to(dtype);
    batch.present = batch.present.to(dtype);
    const auto ab = colorizer->forward(l_t, batch, m_t);
    return assemble(l, to_planes(ab[0]));
}

torch::Tensor discriminate(const LabImage& x, PatchDiscriminator& discriminator)
{
    torch::NoGradGuard no_grad;
    const auto dtype = discriminator->parameters().front().scalar_type();
    const auto l_t = normalize_l(to_tensor(x.l)).unsqueeze(0).to(dtype);
    const auto ab_t = normalize_ab(to_tensor(x.ab)).unsqueeze(0).to(dtype);
    return discriminator->forward(l_t, ab_t);
}

} // namespace fcnet
