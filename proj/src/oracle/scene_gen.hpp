#pragma once

#include <cstdint>
#include <vector>

#include "core/camera.hpp"
#include "core/scene.hpp"
#include "core/vec.hpp"

namespace mvb {

enum class PrimitiveKind { sphere_cluster, box_cluster, torus_ring };

struct SceneSpec {
    int primitive_count = 3;        // 1..8 primitives per scene
    std::vector<Vec3> palette;      // empty -> default 8-color palette
    uint64_t seed = 0;
};

const std::vector<Vec3>& default_palette();

// Procedural scene: clusters of Gaussian splats (spheres, boxes, torus rings)
// inside [-0.9, 0.9]^3, 64..4096 splats total, deterministic under seed, and
// guaranteed to cover at least 1% of pixels from every canonical rig pose.
GaussianScene generate_scene(const SceneSpec& spec);

// Fraction of pixels whose composited alpha (1 - residual transmittance)
// exceeds 0.5 when rendering from the given pose.
double alpha_coverage(const GaussianScene& scene, const CameraPose& pose, int resolution);

}  // namespace mvb
