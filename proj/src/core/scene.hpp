#pragma once

#include <string>
#include <vector>

#include "core/vec.hpp"

namespace mvb {

// One anisotropic 3D Gaussian. Opacity is stored as a logit so optimizers can
// update it unconstrained; color is linear RGB in [0,1].
struct Splat {
    Vec3 mean;
    Quat rotation;       // unit quaternion, scalar first
    Vec3 scale;          // per-axis stddev, strictly positive
    double opacity_logit = 0;
    Vec3 color;
};

struct GaussianScene {
    std::vector<Splat> splats;

    size_t size() const { return splats.size(); }
};

double opacity_from_logit(double logit);
double logit_from_opacity(double opacity);

// Checks the representation invariants (finite fields, unit quaternions within
// 1e-6, positive scales, colors in [0,1], means within the soft bound
// [-limit, limit]^3). Throws a parameter error on violation.
void validate_scene(const GaussianScene& scene, double mean_limit = 1.0);

// Plain-text scene container:
//   line 1:  MVB-GS v1 <count>
//   then one splat per line:
//   mean_x mean_y mean_z qw qx qy qz sx sy sz opacity_logit r g b
// Numbers are written with max_digits10 so a save/load round trip is exact.
void save_scene(const GaussianScene& scene, const std::string& path);
GaussianScene load_scene(const std::string& path);

}  // namespace mvb
