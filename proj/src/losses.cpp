#include "fcnet/losses.hpp"

#include "fcnet/error.hpp"
#include "fcnet/tensors.hpp"

#include <torch/script.h>

namespace fcnet {
namespace {

void check_same_shape(const LabImage& a, const LabImage& b)
{
    if (a.l.height != b.l.height || a.l.width != b.l.width || a.ab.height != b.ab.height || a.ab.width != b.ab.width) {
        throw ShapeError("loss inputs must share H x W");
    }
}

torch::Tensor rgb_tensor(const LabImage& x)
{
    return lab_to_rgb_tensor(to_tensor(x.l).unsqueeze(0), to_tensor(x.ab).unsqueeze(0));
}

} // namespace

struct TorchScriptExtractor::Impl {
    torch::jit::script::Module module;
};

TorchScriptExtractor::TorchScriptExtractor(const std::string& path) : impl_(std::make_unique<Impl>()), path_(path)
{
    try {
        impl_->module = torch::jit::load(path);
    } catch (const c10::Error& e) {
        throw ConfigError("cannot load perceptual extractor '" + path + "': " + e.what_without_backtrace());
    }
    impl_->module.eval();
    for (auto p : impl_->module.parameters()) {
        p.set_requires_grad(false);
    }
}

TorchScriptExtractor::~TorchScriptExtractor() = default;

std::vector<torch::Tensor> TorchScriptExtractor::features(const torch::Tensor& rgb)
{
    const auto out = impl_->module.forward({rgb});
    std::vector<torch::Tensor> taps;
    if (out.isTensor()) {
        taps.push_back(out.toTensor());
    } else if (out.isTuple()) {
        for (const auto& v : out.toTupleRef().elements()) {
            taps.push_back(v.toTensor());
        }
    } else if (out.isList()) {
        for (const auto& v : out.toListRef()) {
            taps.push_back(v.toTensor());
        }
    } else {
        throw ConfigError("perceptual extractor '" + path_ + "' must return tensors");
    }
    return taps;
}

std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec)
{
    if (spec == "none") {
        return nullptr;
    }
    if (spec == "identity") {
        return std::make_shared<IdentityExtractor>();
    }
    const std::string prefix = "torchscript:";
    if (spec.rfind(prefix, 0) == 0) {
        return std::make_shared<TorchScriptExtractor>(spec.substr(prefix.size()));
    }
    throw ConfigError("unknown perceptual extractor '" + spec + "'");
}

torch::Tensor l1_per_sample(const torch::Tensor& pred_ab, const torch::Tensor& target_ab)
{
    if (pred_ab.sizes() != target_ab.sizes()) {
        throw ShapeError("l1: prediction and target shapes differ");
    }
    return (pred_ab - target_ab).abs().flatten(1).mean(1);
}

torch::Tensor perceptual_per_sample(const torch::Tensor& pred_rgb, const torch::Tensor& target_rgb,
                                    FeatureExtractor& extractor)
{
    if (pred_rgb.sizes() != target_rgb.sizes()) {
        throw ShapeError("perceptual: prediction and target shapes differ");
    }
    const auto a = extractor.features(pred_rgb);
    const auto b = extractor.features(target_rgb);
    auto total = torch::zeros({pred_rgb.size(0)}, pred_rgb.options());
    for (std::size_t i = 0; i < a.size(); ++i) {
        total = total + (a[i] - b[i]).square().flatten(1).mean(1);
    }
    return total;
}

torch::Tensor cycle_per_sample(const RepresentationBatch& reencoded, const RepresentationBatch& w_in)
{
    if (reencoded.vectors.sizes() != w_in.vectors.sizes()) {
        throw ShapeError("cycle: representation shapes differ");
    }
    const auto d_w = static_cast<double>(w_in.vectors.size(2));
    const auto present = w_in.present.to(reencoded.vectors.dtype());
    const auto diff = (reencoded.vectors - w_in.vectors).abs().sum(2) * present; // [B,5]
    const auto count = present.sum(1) * d_w;
    return diff.sum(1) / count.clamp_min(1.0);
}

torch::Tensor adversarial_per_sample(const torch::Tensor& logits_real, const torch::Tensor& logits_fake,
                                     AdversarialSide side)
{
    if (side == AdversarialSide::generator) {
        return -logits_fake.flatten(1).mean(1);
    }
    if (logits_real.sizes() != logits_fake.sizes()) {
        throw ShapeError("adversarial: real and fake logits differ in shape");
    }
    return torch::relu(1.0 - logits_real).flatten(1).mean(1) + torch::relu(1.0 + logits_fake).flatten(1).mean(1);
}

double loss_l1(const LabImage& pred, const LabImage& target)
{
    check_same_shape(pred, target);
    return l1_per_sample(to_tensor(pred.ab).unsqueeze(0).to(torch::kFloat64),
                         to_tensor(target.ab).unsqueeze(0).to(torch::kFloat64))
        .item<double>();
}

double loss_perceptual(const LabImage& pred, const LabImage& target, FeatureExtractor& extractor)
{
    check_same_shape(pred, target);
    torch::NoGradGuard no_grad;
    return perceptual_per_sample(rgb_tensor(pred), rgb_tensor(target), extractor).item<double>();
}

double loss_cycle(const LabImage& x_hat, const ComponentMasks& masks, const ColorRepresentation& w_in,
                  ColorEncoder& encoder)
{
    const auto reencoded = encode(x_hat.ab, masks, encoder);
    return cycle_per_sample(to_batch({reencoded}), to_batch({w_in})).item<double>();
}

double loss_adversarial(const torch::Tensor& logits_real, const torch::Tensor& logits_fake, AdversarialSide side)
{
    torch::NoGradGuard no_grad;
    const auto fake = logits_fake.flatten().unsqueeze(0);
    const auto real = logits_real.defined() ? logits_real.flatten().unsqueeze(0) : torch::Tensor();
    return adversarial_per_sample(real, fake, side).item<double>();
}

} // namespace fcnet
