#pragma once

#include "fcnet/colorspace.hpp"
#include "fcnet/parsing.hpp"

#include <torch/torch.h>

#include <vector>

namespace fcnet {

/// Network-side value ranges: l/50 - 1 in [-1,1], ab/128 in [-1,1).
inline constexpr float kAbScale = 128.0F;

torch::Tensor to_tensor(const Planes& planes);             // [C,H,W] float32
Planes to_planes(const torch::Tensor& tensor);              // from [C,H,W]
torch::Tensor normalize_l(const torch::Tensor& l);         // L -> [-1,1]
torch::Tensor normalize_ab(const torch::Tensor& ab);       // ab -> ab / 128
torch::Tensor masks_to_tensor(const ComponentMasks& masks); // [5,H,W] float32 one-hot

/// Stacks per-sample tensors into a batch, [B,...].
torch::Tensor stack(const std::vector<torch::Tensor>& items);

/// Hard majority-vote downscaling of a one-hot [B,5,H,W] mask tensor, same
/// tie-break as downscale_masks(). Result is one-hot [B,5,H/f,W/f].
torch::Tensor downscale_mask_tensor(const torch::Tensor& masks, int factor);

/// Differentiable Lab -> sRGB in [0,1]; l in [0,100], ab in Lab units,
/// [B,1,H,W] and [B,2,H,W]. Linear RGB is clamped to [0,1] before encoding.
torch::Tensor lab_to_rgb_tensor(const torch::Tensor& l, const torch::Tensor& ab);

/// He-normal weights (leaky ReLU gain) and zero biases for every Conv2d and
/// Linear in `module`.
void he_initialize(torch::nn::Module& module, double slope = 0.2);

} // namespace fcnet
