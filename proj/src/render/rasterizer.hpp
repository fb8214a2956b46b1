#pragma once

#include <vector>

#include "core/camera.hpp"
#include "core/image.hpp"
#include "core/scene.hpp"

namespace mvb {

// Orthographic Gaussian splatting with an exact hand-derived backward pass.
//
// Forward model, per pixel, splats sorted near-to-far (ties by splat index):
//   alpha_i = opacity_i * k(m2_i)  with m2 the 2D Mahalanobis distance^2,
//   k(m2)   = (exp(-m2/2) - exp(-9/2)) / (1 - exp(-9/2))  for m2 < 9, else 0
//   color   = sum_i c_i alpha_i T_i + T_end * background,  T_i = prod_{j<i} (1 - alpha_j)
// The kernel is the radius-3 truncated Gaussian rescaled to be continuous at
// the cut and exactly 1 at the center, which keeps finite-difference gradient
// checks meaningful near the support boundary. Accumulation terminates once
// transmittance falls below 1e-4. The 2D covariance gets a 0.3 px^2 isotropic
// floor so single-pixel splats stay differentiable.

struct ProjectedSplat {
    Vec2 mean2d;          // pixel coordinates (continuous, [0,res] across the image)
    double cov2d[3];      // xx, xy, yy, pixel^2, floor included
    double inv_cov[3];    // inverse of cov2d
    double depth;         // along the view axis; smaller = closer
    double opacity;       // sigmoid(opacity_logit)
    Vec3 color;
    int index;            // position in the source scene
    // Conservative pixel bounds of the radius-3 support, [x0,x1)x[y0,y1).
    int x0, x1, y0, y1;
};

struct RenderGrads {
    std::vector<Vec3> d_mean;
    std::vector<std::array<double, 4>> d_rotation;  // w,x,y,z of the stored quaternion
    std::vector<Vec3> d_scale;
    std::vector<double> d_opacity_logit;
    std::vector<Vec3> d_color;
};

inline constexpr double kCovFloor = 0.3;          // px^2
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr double kSupportRadius = 3.0;     // Mahalanobis

std::vector<ProjectedSplat> project_scene(const GaussianScene& scene, const CameraPose& pose,
                                          int resolution);

Image render_scene(const GaussianScene& scene, const CameraPose& pose, int resolution,
                   const Vec3& background = {1, 1, 1});

// d(loss)/d(every splat parameter) given d(loss)/d(pixel). The depth ordering
// is treated as piecewise constant (no gradient through the sort).
RenderGrads render_backward(const GaussianScene& scene, const CameraPose& pose, int resolution,
                            const Vec3& background, const Image& grad_image);

// Total compositing weight sum_pixels alpha_i * T_i per splat, plus the final
// per-pixel transmittance (weights and residual sum to 1 per pixel).
struct SplatWeights {
    std::vector<double> weight;       // per splat, un-normalized
    std::vector<double> residual;     // per pixel, T after the last splat
};
SplatWeights render_splat_weights(const GaussianScene& scene, const CameraPose& pose, int resolution);

}  // namespace mvb
