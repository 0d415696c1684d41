#include "fcnet/noref.hpp"

#include "fcnet/error.hpp"
#include "fcnet/random.hpp"
#include "fcnet/tensors.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <numbers>
#include <random>

namespace fcnet {
namespace {

constexpr double kMinAbsDet = 1e-12;

torch::nn::Sequential strided_trunk(int in, const std::vector<int>& channels)
{
    torch::nn::Sequential trunk;
    for (int out : channels) {
        trunk->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1)));
        trunk->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
        in = out;
    }
    return trunk;
}

void check_inputs(const torch::Tensor& l_norm, const torch::Tensor& masks, int cell)
{
    if (l_norm.dim() != 4 || l_norm.size(1) != 1 || masks.dim() != 4 ||
        masks.size(1) != static_cast<long>(kNumComponents) || l_norm.size(0) != masks.size(0) ||
        l_norm.size(2) != masks.size(2) || l_norm.size(3) != masks.size(3)) {
        throw ShapeError("expected l [B,1,H,W] and masks [B,5,H,W] of the same size");
    }
    if (l_norm.size(2) % cell != 0 || l_norm.size(3) % cell != 0) {
        throw ShapeError("input size must be a multiple of " + std::to_string(cell));
    }
}

std::pair<torch::Tensor, torch::Tensor> image_tensors(const Planes& l, const ComponentMasks& masks,
                                                      torch::ScalarType dtype)
{
    if (l.channels != 1 || l.height != masks.height() || l.width != masks.width()) {
        throw ShapeError("luminance plane and masks must share H x W");
    }
    return {normalize_l(to_tensor(l)).unsqueeze(0).to(dtype), masks_to_tensor(masks).unsqueeze(0).to(dtype)};
}

} // namespace

LinearFlowImpl::LinearFlowImpl(int dim) : dim_(dim)
{
    perm_ = register_buffer("perm", torch::eye(dim));
    lower_ = register_parameter("lower", torch::zeros({dim, dim}));
    upper_ = register_parameter("upper", torch::zeros({dim, dim}));
    log_s_ = register_parameter("log_s", torch::zeros({dim}));
    sign_ = register_buffer("sign", torch::ones({dim}));
    bias_ = register_parameter("bias", torch::zeros({dim}));
}

torch::Tensor LinearFlowImpl::weight() const
{
    const auto eye = torch::eye(dim_, lower_.options());
    const auto l = lower_.tril(-1) + eye;
    const auto u = upper_.triu(1) + torch::diag(sign_ * log_s_.exp());
    return perm_.mm(l).mm(u);
}

torch::Tensor LinearFlowImpl::log_abs_det() const { return log_s_.sum(); }

void LinearFlowImpl::check_invertible() const
{
    const double log_det = log_s_.sum().item<double>();
    if (!std::isfinite(log_det) || log_det < std::log(kMinAbsDet)) {
        throw NumericError("linear flow block is singular (log|det| = " + std::to_string(log_det) + ")");
    }
}

std::pair<torch::Tensor, torch::Tensor> LinearFlowImpl::forward(const torch::Tensor& x)
{
    check_invertible();
    const auto y = x.mm(weight().t()) + bias_;
    return {y, log_abs_det().expand({x.size(0)})};
}

std::pair<torch::Tensor, torch::Tensor> LinearFlowImpl::inverse(const torch::Tensor& y)
{
    check_invertible();
    const auto eye = torch::eye(dim_, lower_.options());
    const auto l = lower_.tril(-1) + eye;
    const auto u = upper_.triu(1) + torch::diag(sign_ * log_s_.exp());
    const auto rhs = perm_.t().mm((y - bias_).t());
    const auto a = torch::linalg_solve_triangular(l, rhs, /*upper=*/false, /*left=*/true, /*unitriangular=*/true);
    const auto x = torch::linalg_solve_triangular(u, a, /*upper=*/true, /*left=*/true, /*unitriangular=*/false);
    return {x.t(), -log_abs_det().expand({y.size(0)})};
}

void LinearFlowImpl::randomize(torch::Generator& gen, double scale)
{
    torch::NoGradGuard no_grad;
    const auto order = torch::randperm(dim_, gen, torch::kLong);
    perm_.copy_(torch::eye(dim_, perm_.options()).index_select(0, order));
    lower_.normal_(0.0, scale, gen);
    upper_.normal_(0.0, scale, gen);
    log_s_.normal_(0.0, scale, gen);
    bias_.normal_(0.0, scale, gen);
    sign_.copy_(torch::empty_like(sign_).bernoulli_(0.5, gen) * 2.0 - 1.0);
}

CouplingImpl::CouplingImpl(int dim, int hidden, int context_dim) : split_(dim / 2)
{
    const int rest = dim - split_;
    net_ = register_module("net", torch::nn::Sequential(
                                      torch::nn::Linear(split_ + context_dim, hidden),
                                      torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                                      torch::nn::Linear(hidden, hidden),
                                      torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                                      torch::nn::Linear(hidden, 2 * rest)));
    torch::NoGradGuard no_grad;
    auto last = net_->ptr<torch::nn::LinearImpl>(4);
    last->weight.zero_();
    last->bias.zero_();
}

std::pair<torch::Tensor, torch::Tensor> CouplingImpl::scale_shift(const torch::Tensor& x1, const torch::Tensor& context)
{
    const auto h = net_->forward(torch::cat({x1, context}, 1));
    const auto rest = h.size(1) / 2;
    return {torch::tanh(h.narrow(1, 0, rest)), h.narrow(1, rest, rest)};
}

std::pair<torch::Tensor, torch::Tensor> CouplingImpl::forward(const torch::Tensor& x, const torch::Tensor& context)
{
    const auto x1 = x.narrow(1, 0, split_);
    const auto x2 = x.narrow(1, split_, x.size(1) - split_);
    const auto [s, t] = scale_shift(x1, context);
    return {torch::cat({x1, x2 * s.exp() + t}, 1), s.sum(1)};
}

std::pair<torch::Tensor, torch::Tensor> CouplingImpl::inverse(const torch::Tensor& y, const torch::Tensor& context)
{
    const auto y1 = y.narrow(1, 0, split_);
    const auto y2 = y.narrow(1, split_, y.size(1) - split_);
    const auto [s, t] = scale_shift(y1, context);
    return {torch::cat({y1, (y2 - t) * (-s).exp()}, 1), -s.sum(1)};
}

void CouplingImpl::randomize(torch::Generator& gen, double scale)
{
    torch::NoGradGuard no_grad;
    for (auto& p : net_->parameters()) {
        p.normal_(0.0, scale, gen);
    }
}

ComponentFlowImpl::ComponentFlowImpl(int dim, int blocks, int hidden, int context_dim) : dim_(dim)
{
    for (int i = 0; i < blocks; ++i) {
        linears_.push_back(register_module("linear" + std::to_string(i), LinearFlow(dim)));
        couplings_.push_back(register_module("coupling" + std::to_string(i), Coupling(dim, hidden, context_dim)));
    }
}

std::pair<torch::Tensor, torch::Tensor> ComponentFlowImpl::forward(const torch::Tensor& z, const torch::Tensor& context)
{
    auto x = z;
    auto logdet = torch::zeros({z.size(0)}, z.options());
    for (std::size_t i = 0; i < linears_.size(); ++i) {
        auto [y, ld] = linears_[i]->forward(x);
        auto [y2, ld2] = couplings_[i]->forward(y, context);
        x = y2;
        logdet = logdet + ld + ld2;
    }
    return {x, logdet};
}

std::pair<torch::Tensor, torch::Tensor> ComponentFlowImpl::inverse(const torch::Tensor& w, const torch::Tensor& context)
{
    auto y = w;
    auto logdet = torch::zeros({w.size(0)}, w.options());
    for (std::size_t i = linears_.size(); i-- > 0;) {
        auto [x2, ld2] = couplings_[i]->inverse(y, context);
        auto [x, ld] = linears_[i]->inverse(x2);
        y = x;
        logdet = logdet + ld + ld2;
    }
    return {y, logdet};
}

torch::Tensor ComponentFlowImpl::nll(const torch::Tensor& w, const torch::Tensor& context)
{
    const auto [z, logdet_inverse] = inverse(w, context);
    const double log_norm = 0.5 * dim_ * std::log(2.0 * std::numbers::pi);
    return 0.5 * z.square().sum(1) + log_norm - logdet_inverse;
}

void ComponentFlowImpl::randomize(std::uint64_t seed, double scale)
{
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (std::size_t i = 0; i < linears_.size(); ++i) {
        linears_[i]->randomize(gen, scale);
        couplings_[i]->randomize(gen, scale);
    }
}

ContextEncoderImpl::ContextEncoderImpl(const ModelConfig& config, Component component)
    : component_(component), cell_(1 << static_cast<int>(config.context_channels.size()))
{
    if (config.context_channels.empty()) {
        throw ConfigError("the flow context encoder needs at least one stage");
    }
    trunk_ = register_module("trunk", strided_trunk(1 + static_cast<int>(kNumComponents), config.context_channels));
    out_ = register_module("out", torch::nn::Linear(2 * config.context_channels.back(), config.flow_context));
}

torch::Tensor ContextEncoderImpl::forward(const torch::Tensor& l_norm, const torch::Tensor& masks)
{
    check_inputs(l_norm, masks, cell_);
    const auto features = trunk_->forward(torch::cat({l_norm, masks}, 1));
    const auto weights = torch::avg_pool2d(masks.select(1, static_cast<long>(index_of(component_))).unsqueeze(1), cell_);
    const auto pooled = (features * weights).sum({2, 3}) / weights.sum({2, 3}).clamp_min(1e-12);
    return out_->forward(torch::cat({pooled, features.mean({2, 3})}, 1));
}

FlowSetImpl::FlowSetImpl(const ModelConfig& config) : d_w_(config.d_w)
{
    for (auto c : kAllComponents) {
        const std::string name(to_string(c));
        flows_[index_of(c)] = register_module(
            "flow_" + name, ComponentFlow(config.d_w, config.flow_blocks, config.flow_hidden, config.flow_context));
        contexts_[index_of(c)] = register_module("context_" + name, ContextEncoder(config, c));
    }
    trained_ = register_buffer("trained", torch::zeros({1}));
}

torch::Tensor FlowSetImpl::context(Component c, const torch::Tensor& l_norm, const torch::Tensor& masks)
{
    return contexts_[index_of(c)]->forward(l_norm, masks);
}

torch::Tensor FlowSetImpl::nll(Component c, const torch::Tensor& w_c, const torch::Tensor& l_norm,
                               const torch::Tensor& masks)
{
    return flows_[index_of(c)]->nll(w_c, context(c, l_norm, masks));
}

torch::Tensor FlowSetImpl::sample(Component c, const torch::Tensor& z, const torch::Tensor& l_norm,
                                  const torch::Tensor& masks)
{
    return flows_[index_of(c)]->forward(z, context(c, l_norm, masks)).first;
}

bool FlowSetImpl::trained() const { return trained_.item<double>() > 0.5; }

void FlowSetImpl::set_trained(bool value)
{
    torch::NoGradGuard no_grad;
    trained_.fill_(value ? 1.0 : 0.0);
}

AutoHeadImpl::AutoHeadImpl(const ModelConfig& config) : cell_(1 << static_cast<int>(config.auto_channels.size()))
{
    if (config.auto_channels.empty()) {
        throw ConfigError("the automatic head needs at least one stage");
    }
    trunk_ = register_module("trunk", strided_trunk(1 + static_cast<int>(kNumComponents), config.auto_channels));
    const long k = static_cast<long>(kNumComponents);
    const long in = 2L * config.auto_channels.back();
    const long hidden = config.auto_head_hidden;
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    head_w1_ = register_parameter("head_w1", torch::empty({k, in, hidden}).uniform_(-bound1, bound1));
    head_b1_ = register_parameter("head_b1", torch::empty({k, hidden}).uniform_(-bound1, bound1));
    head_w2_ = register_parameter("head_w2", torch::empty({k, hidden, config.d_w}).uniform_(-bound2, bound2));
    head_b2_ = register_parameter("head_b2", torch::empty({k, config.d_w}).uniform_(-bound2, bound2));
}

RepresentationBatch AutoHeadImpl::forward(const torch::Tensor& l_norm, const torch::Tensor& masks)
{
    check_inputs(l_norm, masks, cell_);
    const auto features = trunk_->forward(torch::cat({l_norm, masks}, 1)); // [B,C,h,w]
    const auto weights = torch::avg_pool2d(masks, cell_);                  // [B,5,h,w]
    const auto pooled =
        torch::einsum("bkhw,bchw->bkc", {weights, features}) / weights.sum({2, 3}).clamp_min(1e-12).unsqueeze(-1);
    const auto global = features.mean({2, 3}).unsqueeze(1).expand_as(pooled);
    auto hidden = torch::einsum("bkc,kcd->bkd", {torch::cat({pooled, global}, 2), head_w1_}) + head_b1_;
    hidden = torch::leaky_relu(hidden, 0.2);
    const auto vectors = torch::einsum("bkd,kde->bke", {hidden, head_w2_}) + head_b2_;
    return {vectors, torch::ones({vectors.size(0), vectors.size(1)}, vectors.options())};
}

ColorRepresentation sample(const Planes& l, const ComponentMasks& masks, std::uint64_t seed,
                           const std::array<bool, kNumComponents>& subset, const ColorRepresentation& fallback,
                           FlowSet& flows)
{
    bool any = false;
    for (bool s : subset) {
        any = any || s;
    }
    if (!any) {
        return fallback;
    }
    if (!flows->trained()) {
        throw ModelStateError("the flow model has not been trained");
    }
    if (fallback.d_w != flows->d_w()) {
        throw InvalidArgument("fallback representation width does not match the flow model");
    }
    torch::NoGradGuard no_grad;
    const auto dtype = flows->parameters().front().scalar_type();
    const auto [l_t, m_t] = image_tensors(l, masks, dtype);
    auto out = fallback;
    for (auto c : kAllComponents) {
        if (!subset[index_of(c)]) {
            continue;
        }
        std::mt19937_64 rng(mix_seed(seed, index_of(c)));
        std::normal_distribution<double> normal(0.0, 1.0);
        auto z = torch::empty({1, flows->d_w()}, torch::kFloat64);
        auto acc = z.accessor<double, 2>();
        for (int k = 0; k < flows->d_w(); ++k) {
            acc[0][k] = normal(rng);
        }
        const auto w_c = flows->sample(c, z.to(dtype), l_t, m_t).to(torch::kFloat32).contiguous();
        std::copy_n(w_c.data_ptr<float>(), flows->d_w(), out.vectors[index_of(c)].data());
        out.present[index_of(c)] = true;
    }
    return out;
}

ColorRepresentation auto_predict(const Planes& l, const ComponentMasks& masks, AutoHead& head)
{
    torch::NoGradGuard no_grad;
    const auto dtype = head->parameters().front().scalar_type();
    const auto [l_t, m_t] = image_tensors(l, masks, dtype);
    return from_batch(head->forward(l_t, m_t), 0);
}

} // namespace fcnet
