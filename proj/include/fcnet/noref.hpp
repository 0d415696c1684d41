#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/components.hpp"
#include "fcnet/model_config.hpp"
#include "fcnet/parsing.hpp"
#include "fcnet/representation.hpp"

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace fcnet {

/// Invertible linear map y = P L U x + b with P a fixed permutation, L unit
/// lower triangular and U upper triangular with diagonal sign * exp(log_s).
class LinearFlowImpl : public torch::nn::Module {
public:
    explicit LinearFlowImpl(int dim);

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);  // (y, logdet [B])
    std::pair<torch::Tensor, torch::Tensor> inverse(const torch::Tensor& y);  // (x, logdet of the inverse [B])

    /// Dense matrix P L U.
    [[nodiscard]] torch::Tensor weight() const;
    [[nodiscard]] torch::Tensor log_abs_det() const;

    /// Random permutation, triangular factors, scales and bias.
    void randomize(torch::Generator& gen, double scale);

private:
    void check_invertible() const;

    int dim_;
    torch::Tensor perm_, lower_, upper_, log_s_, sign_, bias_;
};
TORCH_MODULE(LinearFlow);

/// Affine coupling: the second half is scaled by exp(tanh(s)) and shifted,
/// with (s, t) computed from the first half and the context vector.
class CouplingImpl : public torch::nn::Module {
public:
    CouplingImpl(int dim, int hidden, int context_dim);

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x, const torch::Tensor& context);
    std::pair<torch::Tensor, torch::Tensor> inverse(const torch::Tensor& y, const torch::Tensor& context);

    void randomize(torch::Generator& gen, double scale);

private:
    std::pair<torch::Tensor, torch::Tensor> scale_shift(const torch::Tensor& x1, const torch::Tensor& context);

    int split_;
    torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Coupling);

/// Conditional flow for one component: blocks of (linear, coupling) mapping
/// base samples z ~ N(0, I) to representation vectors w_c. Freshly built
/// flows are the identity map.
class ComponentFlowImpl : public torch::nn::Module {
public:
    ComponentFlowImpl(int dim, int blocks, int hidden, int context_dim);

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& z, const torch::Tensor& context);
    std::pair<torch::Tensor, torch::Tensor> inverse(const torch::Tensor& w, const torch::Tensor& context);

    /// -log N(inverse(w); 0, I) - logdet of the inverse, per sample.
    torch::Tensor nll(const torch::Tensor& w, const torch::Tensor& context);

    void randomize(std::uint64_t seed, double scale = 0.3);

    [[nodiscard]] int dim() const noexcept { return dim_; }

private:
    int dim_;
    std::vector<LinearFlow> linears_;
    std::vector<Coupling> couplings_;
};
TORCH_MODULE(ComponentFlow);

/// Context for the flow of one component: strided convolutions over
/// (l, masks), pooled under the component mask and over the whole image.
class ContextEncoderImpl : public torch::nn::Module {
public:
    ContextEncoderImpl(const ModelConfig& config, Component component);
    torch::Tensor forward(const torch::Tensor& l_norm, const torch::Tensor& masks);

private:
    Component component_;
    int cell_;
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(ContextEncoder);

/// g_flow: five independent conditional flows, each with its own context
/// encoder.
class FlowSetImpl : public torch::nn::Module {
public:
    explicit FlowSetImpl(const ModelConfig& config);

    ComponentFlow& flow(Component c) { return flows_[index_of(c)]; }
    ContextEncoder& context_encoder(Component c) { return contexts_[index_of(c)]; }

    torch::Tensor context(Component c, const torch::Tensor& l_norm, const torch::Tensor& masks);
    torch::Tensor nll(Component c, const torch::Tensor& w_c, const torch::Tensor& l_norm, const torch::Tensor& masks);
    torch::Tensor sample(Component c, const torch::Tensor& z, const torch::Tensor& l_norm, const torch::Tensor& masks);

    [[nodiscard]] bool trained() const;
    void set_trained(bool value);
    [[nodiscard]] int d_w() const noexcept { return d_w_; }

private:
    int d_w_;
    std::array<ComponentFlow, kNumComponents> flows_{nullptr, nullptr, nullptr, nullptr, nullptr};
    std::array<ContextEncoder, kNumComponents> contexts_{nullptr, nullptr, nullptr, nullptr, nullptr};
    torch::Tensor trained_;
};
TORCH_MODULE(FlowSet);

/// g_auto: regresses all five vectors from (l, masks).
class AutoHeadImpl : public torch::nn::Module {
public:
    explicit AutoHeadImpl(const ModelConfig& config);
    /// Every component is reported present.
    RepresentationBatch forward(const torch::Tensor& l_norm, const torch::Tensor& masks);

private:
    int cell_;
    torch::nn::Sequential trunk_{nullptr};
    torch::Tensor head_w1_, head_b1_, head_w2_, head_b2_;
};
TORCH_MODULE(AutoHead);

/// Components in `subset` are drawn from their flows with z seeded by
/// (seed, component); the rest are copied from `fallback`. Throws
/// ModelStateError when a flow is needed and the set is untrained.
ColorRepresentation sample(const Planes& l, const ComponentMasks& masks, std::uint64_t seed,
                           const std::array<bool, kNumComponents>& subset, const ColorRepresentation& fallback,
                           FlowSet& flows);

ColorRepresentation auto_predict(const Planes& l, const ComponentMasks& masks, AutoHead& head);

} // namespace fcnet
