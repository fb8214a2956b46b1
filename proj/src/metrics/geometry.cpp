#include "metrics/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <tuple>
#include <unordered_map>

#include "core/error.hpp"

namespace mvb {

namespace {

uint64_t cell_key(int64_t ix, int64_t iy, int64_t iz) {
    // pack signed 21-bit cell coordinates
    const uint64_t m = (1u << 21) - 1;
    return ((static_cast<uint64_t>(ix) & m) << 42) | ((static_cast<uint64_t>(iy) & m) << 21) |
           (static_cast<uint64_t>(iz) & m);
}

struct PointGrid {
    double cell = 1.0;
    Vec3 origin{};
    int64_t max_ix = 0, max_iy = 0, max_iz = 0;  // occupied index range is [0, max]
    std::unordered_map<uint64_t, std::vector<int>> cells;
    const std::vector<Vec3>* pts = nullptr;

    void build(const std::vector<Vec3>& points) {
        pts = &points;
        Vec3 lo = points[0], hi = points[0];
        for (const Vec3& p : points) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            lo.z = std::min(lo.z, p.z);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
            hi.z = std::max(hi.z, p.z);
        }
        origin = lo;
        const double diag = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
        const double per_axis = std::cbrt(static_cast<double>(points.size()));
        cell = std::max(diag / std::max(1.0, per_axis), 1e-9);
        cells.reserve(points.size());
        for (int i = 0; i < static_cast<int>(points.size()); ++i) {
            const auto [ix, iy, iz] = index_of(points[i]);
            max_ix = std::max(max_ix, ix);
            max_iy = std::max(max_iy, iy);
            max_iz = std::max(max_iz, iz);
            cells[cell_key(ix, iy, iz)].push_back(i);
        }
    }

    std::tuple<int64_t, int64_t, int64_t> index_of(const Vec3& p) const {
        return {static_cast<int64_t>(std::floor((p.x - origin.x) / cell)),
                static_cast<int64_t>(std::floor((p.y - origin.y) / cell)),
                static_cast<int64_t>(std::floor((p.z - origin.z) / cell))};
    }

    double nn_dist(const Vec3& q) const {
        auto [qx, qy, qz] = index_of(q);
        // Coordinate-wise clamping into the occupied range can only shrink
        // per-axis distances to grid points, so the shell lower bound below
        // stays valid for the original query while the search stays local.
        qx = std::clamp<int64_t>(qx, 0, max_ix);
        qy = std::clamp<int64_t>(qy, 0, max_iy);
        qz = std::clamp<int64_t>(qz, 0, max_iz);
        const int64_t span = std::max({max_ix, max_iy, max_iz});
        double best2 = std::numeric_limits<double>::infinity();
        for (int64_t k = 0; k <= span + 1; ++k) {
            // Any point in a cell at Chebyshev shell k is at least (k-1)*cell
            // away, so a found best is certified once that bound passes it.
            if (best2 < std::numeric_limits<double>::infinity()) {
                const double bound = (static_cast<double>(k) - 1.0) * cell;
                if (bound > 0.0 && bound * bound > best2) break;
            }
            for (int64_t dx = -k; dx <= k; ++dx) {
                if (qx + dx < 0 || qx + dx > max_ix) continue;
                for (int64_t dy = -k; dy <= k; ++dy) {
                    if (qy + dy < 0 || qy + dy > max_iy) continue;
                    for (int64_t dz = -k; dz <= k; ++dz) {
                        if (qz + dz < 0 || qz + dz > max_iz) continue;
                        if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != k)
                            continue;
                        auto it = cells.find(cell_key(qx + dx, qy + dy, qz + dz));
                        if (it == cells.end()) continue;
                        for (int idx : it->second) {
                            const Vec3& p = (*pts)[idx];
                            const double ddx = p.x - q.x, ddy = p.y - q.y, ddz = p.z - q.z;
                            const double d2 = ddx * ddx + ddy * ddy + ddz * ddz;
                            if (d2 < best2) best2 = d2;
                        }
                    }
                }
            }
        }
        // the loop covers every occupied cell by k = span, so best2 is final
        return std::sqrt(best2);
    }
};

void check_nonempty(const PointSet& s, const char* op) {
    if (s.points.empty()) fail_param(std::string(op) + ": empty point set");
    for (const Vec3& p : s.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            fail_param(std::string(op) + ": non-finite point coordinates");
}

}  // namespace

std::vector<double> nn_distances(const PointSet& from, const PointSet& to) {
    check_nonempty(from, "nn_distances");
    check_nonempty(to, "nn_distances");
    PointGrid grid;
    grid.build(to.points);
    std::vector<double> out(from.points.size());
    for (size_t i = 0; i < from.points.size(); ++i) out[i] = grid.nn_dist(from.points[i]);
    return out;
}

double chamfer(const PointSet& a, const PointSet& b) {
    const std::vector<double> ab = nn_distances(a, b);
    const std::vector<double> ba = nn_distances(b, a);
    double ma = 0.0, mb = 0.0;
    for (double d : ab) ma += d;
    for (double d : ba) mb += d;
    ma /= ab.size();
    mb /= ba.size();
    return 0.5 * (ma + mb);
}

double fscore(const PointSet& a, const PointSet& b, double tau) {
    if (tau <= 0.0) fail_param("fscore: tau must be positive");
    const std::vector<double> ab = nn_distances(a, b);
    const std::vector<double> ba = nn_distances(b, a);
    double prec = 0.0, rec = 0.0;
    for (double d : ab) prec += (d <= tau) ? 1.0 : 0.0;
    for (double d : ba) rec += (d <= tau) ? 1.0 : 0.0;
    prec /= ab.size();
    rec /= ba.size();
    if (prec + rec <= 0.0) return 0.0;
    return 2.0 * prec * rec / (prec + rec);
}

PointSet normalize_points(const PointSet& a) {
    check_nonempty(a, "normalize_points");
    Vec3 lo = a.points[0], hi = a.points[0];
    for (const Vec3& p : a.points) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    const Vec3 center{(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2};
    const double half = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z}) / 2.0;
    const double s = (half < 1e-12) ? 1.0 : 1.0 / half;
    PointSet out;
    out.points.reserve(a.points.size());
    for (const Vec3& p : a.points)
        out.points.push_back({(p.x - center.x) * s, (p.y - center.y) * s, (p.z - center.z) * s});
    return out;
}

PointSet sample_points_from_scene(const GaussianScene& scene, int count, Rng& rng) {
    if (count < 1) fail_param("sample_points_from_scene: count must be >= 1");
    if (scene.splats.empty()) fail_param("sample_points_from_scene: empty scene");
    std::vector<double> cdf(scene.splats.size());
    double acc = 0.0;
    for (size_t i = 0; i < scene.splats.size(); ++i) {
        const Splat& sp = scene.splats[i];
        const double w = opacity_from_logit(sp.opacity_logit) *
                         ((sp.scale.x + sp.scale.y + sp.scale.z) / 3.0);
        acc += w;
        cdf[i] = acc;
    }
    PointSet out;
    out.points.reserve(count);
    for (int n = 0; n < count; ++n) {
        size_t pick = 0;
        if (acc > 0.0) {
            const double u = rng.uniform(0.0, acc);
            pick = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
            if (pick >= cdf.size()) pick = cdf.size() - 1;
        } else {
            pick = static_cast<size_t>(rng.next_below(scene.splats.size()));
        }
        const Splat& sp = scene.splats[pick];
        const Mat3 r = rotation_matrix(sp.rotation);
        const Vec3 z{rng.normal() * sp.scale.x, rng.normal() * sp.scale.y,
                     rng.normal() * sp.scale.z};
        out.points.push_back(sp.mean + mul(r, z));
    }
    return out;
}

}  // namespace mvb
