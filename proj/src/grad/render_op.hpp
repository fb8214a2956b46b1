#pragma once

#include "core/camera.hpp"
#include "core/scene.hpp"
#include "grad/tensor.hpp"
#include "render/rasterizer.hpp"

namespace mvb::grad {

// Column layout of a splat-parameter matrix: one row per splat,
// [mean xyz, quat wxyz, scale xyz, opacity_logit, color rgb] = 14 columns.
inline constexpr int kSplatCols = 14;

GaussianScene scene_from_rows(const Tensor& splats);
Tensor rows_from_scene(const GaussianScene& scene, bool requires_grad);

// Differentiable rasterization as a graph node: (n,14) -> (res,res,3).
// Quaternions need not be unit; normalization happens inside the renderer and
// its gradient is part of the backward pass.
Tensor render_op(const Tensor& splats, const CameraPose& pose, int resolution,
                 const Vec3& background = {1, 1, 1});

}  // namespace mvb::grad
