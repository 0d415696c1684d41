#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/parsing.hpp"
#include "fcnet/representation.hpp"

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

namespace fcnet {

/// Frozen image feature extractor used by the perceptual loss. Input is sRGB
/// in [0,1], [B,3,H,W]; output is one feature map per tap.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& rgb) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Single tap returning the RGB input itself.
class IdentityExtractor final : public FeatureExtractor {
public:
    std::vector<torch::Tensor> features(const torch::Tensor& rgb) override { return {rgb}; }
    [[nodiscard]] std::string name() const override { return "identity"; }
};

/// TorchScript module whose forward returns a tensor, a tuple or a list of
/// tensors (one per tap). Parameters are frozen on load.
class TorchScriptExtractor final : public FeatureExtractor {
public:
    explicit TorchScriptExtractor(const std::string& path);
    ~TorchScriptExtractor() override;
    std::vector<torch::Tensor> features(const torch::Tensor& rgb) override;
    [[nodiscard]] std::string name() const override { return "torchscript:" + path_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_;
};

/// "identity", "none" (returns nullptr) or "torchscript:<path>". Unknown
/// specs and unloadable files raise ConfigError.
std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec);

enum class AdversarialSide { generator, discriminator };

// Tensor forms used by the trainer. Each returns one value per sample, [B].

/// Mean absolute ab error in Lab units.
torch::Tensor l1_per_sample(const torch::Tensor& pred_ab, const torch::Tensor& target_ab);

/// Sum over taps of the mean squared feature distance.
torch::Tensor perceptual_per_sample(const torch::Tensor& pred_rgb, const torch::Tensor& target_rgb,
                                    FeatureExtractor& extractor);

/// Mean |reencoded - w_in| over the components present in w_in; 0 for a
/// sample with no present component.
torch::Tensor cycle_per_sample(const RepresentationBatch& reencoded, const RepresentationBatch& w_in);

/// Hinge loss. Discriminator: mean(relu(1 - real)) + mean(relu(1 + fake));
/// generator: -mean(fake) (`real` is ignored and may be undefined).
torch::Tensor adversarial_per_sample(const torch::Tensor& logits_real, const torch::Tensor& logits_fake,
                                     AdversarialSide side);

// Image-level forms.

double loss_l1(const LabImage& pred, const LabImage& target);
double loss_perceptual(const LabImage& pred, const LabImage& target, FeatureExtractor& extractor);
double loss_cycle(const LabImage& x_hat, const ComponentMasks& masks, const ColorRepresentation& w_in,
                  ColorEncoder& encoder);
double loss_adversarial(const torch::Tensor& logits_real, const torch::Tensor& logits_fake, AdversarialSide side);

} // namespace fcnet
