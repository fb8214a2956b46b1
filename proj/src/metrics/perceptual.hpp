#pragma once

#include "core/image.hpp"
#include "grad/tensor.hpp"

namespace mvb {

// Differentiable stand-in for a learned perceptual distance:
//   0.5 * (1 - MS-SSIM over 3 dyadic scales)  +  0.5 * L1 of Sobel gradient
//   magnitude differences,
// computed on luminance after area-downscaling both images to
// `resolution` x `resolution`. Exactly 0 on identical inputs, symmetric, and
// smooth everywhere (the L1 uses sqrt(d^2+eps)-sqrt(eps)).
//
// Graph version: inputs are (h,w,3) tensors, h == w divisible by resolution.
grad::Tensor perceptual_graph(const grad::Tensor& a, const grad::Tensor& b, int resolution);

// Plain evaluation on images (wraps the graph with constant tensors).
double perceptual_proxy(const Image& a, const Image& b, int resolution);

grad::Tensor image_to_tensor(const Image& img, bool requires_grad = false);
Image tensor_to_image(const grad::Tensor& t);

}  // namespace mvb
