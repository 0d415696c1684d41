#include "fcnet/tensors.hpp"

#include "fcnet/error.hpp"

namespace fcnet {

torch::Tensor to_tensor(const Planes& planes)
{
    return torch::from_blob(const_cast<float*>(planes.values.data()), {planes.channels, planes.height, planes.width},
                            torch::kFloat32)
        .clone();
}

Planes to_planes(const torch::Tensor& tensor)
{
    if (tensor.dim() != 3) {
        throw ShapeError("expected a [C,H,W] tensor");
    }
    const auto t = tensor.detach().to(torch::kFloat32).contiguous();
    Planes out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
    std::copy_n(t.data_ptr<float>(), out.values.size(), out.values.data());
    return out;
}

torch::Tensor normalize_l(const torch::Tensor& l) { return l / 50.0 - 1.0; }

torch::Tensor normalize_ab(const torch::Tensor& ab) { return ab / kAbScale; }

torch::Tensor masks_to_tensor(const ComponentMasks& masks)
{
    auto out = torch::zeros({static_cast<long>(kNumComponents), masks.height(), masks.width()}, torch::kFloat32);
    auto acc = out.accessor<float, 3>();
    for (int y = 0; y < masks.height(); ++y) {
        for (int x = 0; x < masks.width(); ++x) {
            acc[static_cast<long>(index_of(masks.at(y, x)))][y][x] = 1.0F;
        }
    }
    return out;
}

torch::Tensor stack(const std::vector<torch::Tensor>& items) { return torch::stack(items); }

torch::Tensor downscale_mask_tensor(const torch::Tensor& masks, int factor)
{
    if (masks.dim() != 4 || masks.size(1) != static_cast<long>(kNumComponents)) {
        throw ShapeError("expected a [B,5,H,W] mask tensor");
    }
    if (factor <= 0 || masks.size(2) % factor != 0 || masks.size(3) % factor != 0) {
        throw InvalidArgument("downscale factor " + std::to_string(factor) + " does not divide the mask size");
    }
    if (factor == 1) {
        return masks;
    }
    torch::NoGradGuard no_grad;
    const auto counts = torch::avg_pool2d(masks, factor) * static_cast<double>(factor * factor);
    // Integer vote counts plus a sub-unit priority bias: ties go to the higher priority.
    auto priority = torch::tensor(std::vector<float>(kTiePriority.begin(), kTiePriority.end())).to(masks.dtype()) * 0.1;
    const auto scores = torch::round(counts) + priority.view({1, -1, 1, 1});
    const auto winner = scores.argmax(1);
    return torch::one_hot(winner, static_cast<long>(kNumComponents)).permute({0, 3, 1, 2}).to(masks.dtype()).contiguous();
}

torch::Tensor lab_to_rgb_tensor(const torch::Tensor& l, const torch::Tensor& ab)
{
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    const auto fy = (l + 16.0) / 116.0;
    const auto fx = fy + ab.select(1, 0).unsqueeze(1) / 500.0;
    const auto fz = fy - ab.select(1, 1).unsqueeze(1) / 200.0;
    auto finv = [&](const torch::Tensor& f) {
        const auto cube = f * f * f;
        return torch::where(cube > eps, cube, (116.0 * f - 16.0) / kappa);
    };
    const auto x = 0.95047 * finv(fx);
    const auto y = torch::where(l > kappa * eps, fy * fy * fy, l / kappa);
    const auto z = 1.08883 * finv(fz);
    const auto r = (3.2404542 * x - 1.5371385 * y - 0.4985314 * z).clamp(0.0, 1.0);
    const auto g = (-0.9692660 * x + 1.8760108 * y + 0.0415560 * z).clamp(0.0, 1.0);
    const auto b = (0.0556434 * x - 0.2040259 * y + 1.0572252 * z).clamp(0.0, 1.0);
    auto encode = [](const torch::Tensor& v) {
        // pow of exact zero has an infinite derivative; keep the branch finite.
        const auto safe = v.clamp_min(0.0031308);
        return torch::where(v <= 0.0031308, 12.92 * v, 1.055 * torch::pow(safe, 1.0 / 2.4) - 0.055);
    };
    return torch::cat({encode(r), encode(g), encode(b)}, 1);
}

void he_initialize(torch::nn::Module& module, double slope)
{
    torch::NoGradGuard no_grad;
    auto init = [slope](torch::Tensor& weight, torch::Tensor& bias) {
        torch::nn::init::kaiming_normal_(weight, slope, torch::kFanIn, torch::kLeakyReLU);
        if (bias.defined()) {
            bias.zero_();
        }
    };
    auto visit = [&](torch::nn::Module& m) {
        if (auto* c = m.as<torch::nn::Conv2dImpl>()) {
            init(c->weight, c->bias);
        } else if (auto* l = m.as<torch::nn::LinearImpl>()) {
            init(l->weight, l->bias);
        }
    };
    // include_self would need the module to live in a shared_ptr already,
    // which is not the case inside constructors.
    visit(module);
    for (auto& m : module.modules(/*include_self=*/false)) {
        visit(*m);
    }
}

} // namespace fcnet
