#pragma once

#include <vector>

#include "core/rng.hpp"
#include "core/scene.hpp"
#include "core/vec.hpp"

namespace mvb {

struct PointSet {
    std::vector<Vec3> points;
};

// Exact nearest-neighbor distance from every point of `from` to `to`,
// grid-accelerated (expanding shells with a certified lower bound, so results
// equal brute force bit-for-bit in the absence of ties).
std::vector<double> nn_distances(const PointSet& from, const PointSet& to);

// Symmetric Chamfer distance: (mean_a NN(a->b) + mean_b NN(b->a)) / 2.
double chamfer(const PointSet& a, const PointSet& b);

// F-score at threshold tau: harmonic mean of precision (fraction of a within
// tau of b) and recall (the reverse); 0 when both vanish.
double fscore(const PointSet& a, const PointSet& b, double tau = 0.05);

// Center the axis-aligned bounding box on the origin and scale the largest
// half-extent to 1. Degenerate (single-point) sets are centered, not scaled.
PointSet normalize_points(const PointSet& a);

// Draw `count` points from the scene: splat picked with probability
// proportional to opacity * mean(scale), then jittered by that splat's own
// Gaussian (R * diag(scale) * z).
PointSet sample_points_from_scene(const GaussianScene& scene, int count, Rng& rng);

}  // namespace mvb
