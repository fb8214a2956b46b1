#include "render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/threading.hpp"

namespace mvb {

namespace {

const double kCut = std::exp(-0.5 * kSupportRadius * kSupportRadius);
const double kKernelNorm = 1.0 / (1.0 - kCut);

// Kernel value for squared Mahalanobis distance m2 < 9.
inline double kernel(double m2) { return (std::exp(-0.5 * m2) - kCut) * kKernelNorm; }

struct Frame {
    CameraBasis basis;
    double pixscale;  // px per world unit
    double half;      // res / 2
};

Frame make_frame(const CameraPose& pose, int resolution) {
    validate_pose(pose);
    if (resolution <= 0) fail_param("render resolution must be positive");
    Frame fr;
    fr.basis = camera_basis(pose);
    fr.pixscale = resolution / (2.0 * pose.ortho_half_extent);
    fr.half = resolution * 0.5;
    return fr;
}

// Depth order with ties broken by splat index, so rendering is invariant to
// how the scene happens to be stored.
std::vector<int> depth_order(const std::vector<ProjectedSplat>& proj) {
    std::vector<int> order(proj.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (proj[a].depth != proj[b].depth) return proj[a].depth < proj[b].depth;
        return proj[a].index < proj[b].index;
    });
    return order;
}

struct Prepared {
    std::vector<ProjectedSplat> proj;       // scene order
    std::vector<int> order;                 // near-to-far
    std::vector<std::vector<int>> rows;     // per image row, candidates in depth order
};

Prepared prepare(const GaussianScene& scene, const CameraPose& pose, int resolution) {
    Prepared p;
    p.proj = project_scene(scene, pose, resolution);
    p.order = depth_order(p.proj);
    p.rows.resize(resolution);
    for (int idx : p.order) {
        const ProjectedSplat& s = p.proj[idx];
        for (int y = s.y0; y < s.y1; y++) p.rows[y].push_back(idx);
    }
    return p;
}

inline double mahalanobis2(const ProjectedSplat& s, double dx, double dy) {
    return s.inv_cov[0] * dx * dx + 2.0 * s.inv_cov[1] * dx * dy + s.inv_cov[2] * dy * dy;
}

// Backward accumulators, per splat, in image space.
struct SplatAccum {
    double color[3] = {0, 0, 0};
    double opacity = 0;
    double mean2d[2] = {0, 0};
    double cov[3] = {0, 0, 0};  // xx, xy (per-slot), yy
};

// Rows are processed in fixed-size chunks and chunk results reduced in chunk
// order, so gradients are bit-identical for any MVB_THREADS setting.
constexpr int kRowChunk = 8;

}  // namespace

std::vector<ProjectedSplat> project_scene(const GaussianScene& scene, const CameraPose& pose,
                                          int resolution) {
    Frame fr = make_frame(pose, resolution);
    std::vector<ProjectedSplat> out(scene.splats.size());
    for (size_t i = 0; i < scene.splats.size(); i++) {
        const Splat& s = scene.splats[i];
        ProjectedSplat& ps = out[i];
        ps.index = static_cast<int>(i);

        double camx = dot(s.mean, fr.basis.right);
        double camy = dot(s.mean, fr.basis.up);
        ps.depth = dot(s.mean, fr.basis.forward);
        ps.mean2d = {camx * fr.pixscale + fr.half, -camy * fr.pixscale + fr.half};

        Quat q = s.rotation;
        double qn = norm(q);
        if (!(qn > 0)) fail_param("zero-length rotation in splat " + std::to_string(i));
        q = {q.w / qn, q.x / qn, q.y / qn, q.z / qn};
        Mat3 rot = rotation_matrix(q);
        // Sigma3 = R diag(s^2) R^T, computed through M = R diag(s).
        Mat3 m;
        for (int r = 0; r < 3; r++) {
            m(r, 0) = rot(r, 0) * s.scale.x;
            m(r, 1) = rot(r, 1) * s.scale.y;
            m(r, 2) = rot(r, 2) * s.scale.z;
        }
        Mat3 sigma3 = mul(m, transposed(m));

        Vec3 jx = fr.basis.right * fr.pixscale;
        Vec3 jy = fr.basis.up * (-fr.pixscale);
        Vec3 sx = mul(sigma3, jx);
        Vec3 sy = mul(sigma3, jy);
        ps.cov2d[0] = dot(jx, sx) + kCovFloor;
        ps.cov2d[1] = dot(jx, sy);
        ps.cov2d[2] = dot(jy, sy) + kCovFloor;

        double det = ps.cov2d[0] * ps.cov2d[2] - ps.cov2d[1] * ps.cov2d[1];
        ps.inv_cov[0] = ps.cov2d[2] / det;
        ps.inv_cov[1] = -ps.cov2d[1] / det;
        ps.inv_cov[2] = ps.cov2d[0] / det;

        ps.opacity = opacity_from_logit(s.opacity_logit);
        ps.color = s.color;

        double tr = ps.cov2d[0] + ps.cov2d[2];
        double disc = std::sqrt(std::max(0.0, (ps.cov2d[0] - ps.cov2d[2]) * (ps.cov2d[0] - ps.cov2d[2]) +
                                              4.0 * ps.cov2d[1] * ps.cov2d[1]));
        double lmax = 0.5 * (tr + disc);
        double radius = kSupportRadius * std::sqrt(lmax);
        ps.x0 = std::max(0, static_cast<int>(std::floor(ps.mean2d.x - radius - 0.5)));
        ps.x1 = std::min(resolution, static_cast<int>(std::ceil(ps.mean2d.x + radius + 0.5)));
        ps.y0 = std::max(0, static_cast<int>(std::floor(ps.mean2d.y - radius - 0.5)));
        ps.y1 = std::min(resolution, static_cast<int>(std::ceil(ps.mean2d.y + radius + 0.5)));
        if (ps.x0 >= ps.x1 || ps.y0 >= ps.y1) ps.x0 = ps.x1 = ps.y0 = ps.y1 = 0;  // off-screen
    }
    return out;
}

Image render_scene(const GaussianScene& scene, const CameraPose& pose, int resolution,
                   const Vec3& background) {
    Prepared p = prepare(scene, pose, resolution);
    Image img(resolution, resolution);
    parallel_for(resolution, [&](int y_begin, int y_end) {
        for (int y = y_begin; y < y_end; y++) {
            const std::vector<int>& cand = p.rows[y];
            double py = y + 0.5;
            for (int x = 0; x < resolution; x++) {
                double px = x + 0.5;
                double T = 1.0, r = 0, g = 0, b = 0;
                for (int idx : cand) {
                    const ProjectedSplat& s = p.proj[idx];
                    if (x < s.x0 || x >= s.x1) continue;
                    double dx = px - s.mean2d.x, dy = py - s.mean2d.y;
                    double m2 = mahalanobis2(s, dx, dy);
                    if (m2 >= kSupportRadius * kSupportRadius) continue;
                    double a = s.opacity * kernel(m2);
                    double w = a * T;
                    r += s.color.x * w;
                    g += s.color.y * w;
                    b += s.color.z * w;
                    T *= 1.0 - a;
                    if (T < kTransmittanceStop) break;
                }
                img.at(y, x, 0) = r + T * background.x;
                img.at(y, x, 1) = g + T * background.y;
                img.at(y, x, 2) = b + T * background.z;
            }
        }
    });
    return img;
}

RenderGrads render_backward(const GaussianScene& scene, const CameraPose& pose, int resolution,
                            const Vec3& background, const Image& grad_image) {
    if (grad_image.width != resolution || grad_image.height != resolution)
        fail_param("render_backward: gradient image resolution mismatch");
    Frame fr = make_frame(pose, resolution);
    Prepared p = prepare(scene, pose, resolution);
    size_t n = scene.splats.size();

    int chunks = (resolution + kRowChunk - 1) / kRowChunk;
    std::vector<std::vector<SplatAccum>> acc(chunks);

    // Per-pixel contribution record for the replay.
    struct Hit {
        int idx;
        double a, gval, dx, dy, T;
    };

    parallel_for(chunks, [&](int c_begin, int c_end) {
        std::vector<Hit> hits;
        for (int c = c_begin; c < c_end; c++) {
            std::vector<SplatAccum>& ac = acc[c];
            ac.assign(n, SplatAccum{});
            int y_begin = c * kRowChunk;
            int y_end = std::min(resolution, y_begin + kRowChunk);
            for (int y = y_begin; y < y_end; y++) {
                const std::vector<int>& cand = p.rows[y];
                double py = y + 0.5;
                for (int x = 0; x < resolution; x++) {
                    double px = x + 0.5;
                    // Forward replay for this pixel.
                    hits.clear();
                    double T = 1.0;
                    for (int idx : cand) {
                        const ProjectedSplat& s = p.proj[idx];
                        if (x < s.x0 || x >= s.x1) continue;
                        double dx = px - s.mean2d.x, dy = py - s.mean2d.y;
                        double m2 = mahalanobis2(s, dx, dy);
                        if (m2 >= kSupportRadius * kSupportRadius) continue;
                        double gval = kernel(m2);
                        double a = s.opacity * gval;
                        hits.push_back({idx, a, gval, dx, dy, T});
                        T *= 1.0 - a;
                        if (T < kTransmittanceStop) break;
                    }
                    const double gc[3] = {grad_image.at(y, x, 0), grad_image.at(y, x, 1),
                                          grad_image.at(y, x, 2)};
                    // Suffix contribution (everything composited after splat i,
                    // including the background term).
                    double S[3] = {T * background.x, T * background.y, T * background.z};
                    for (size_t h = hits.size(); h-- > 0;) {
                        const Hit& hit = hits[h];
                        const ProjectedSplat& s = p.proj[hit.idx];
                        SplatAccum& sa = ac[hit.idx];
                        double w = hit.a * hit.T;
                        const double col[3] = {s.color.x, s.color.y, s.color.z};
                        double dL_da = 0;
                        for (int ch = 0; ch < 3; ch++) {
                            sa.color[ch] += gc[ch] * w;
                            dL_da += gc[ch] * (hit.T * col[ch] - S[ch] / (1.0 - hit.a));
                            S[ch] += col[ch] * w;
                        }
                        sa.opacity += hit.gval * dL_da;
                        double dL_dg = s.opacity * dL_da;
                        double e = std::exp(-0.5 * mahalanobis2(s, hit.dx, hit.dy));
                        double dL_dm2 = dL_dg * (-0.5 * e * kKernelNorm);
                        double ux = s.inv_cov[0] * hit.dx + s.inv_cov[1] * hit.dy;
                        double uy = s.inv_cov[1] * hit.dx + s.inv_cov[2] * hit.dy;
                        sa.mean2d[0] += dL_dm2 * (-2.0 * ux);
                        sa.mean2d[1] += dL_dm2 * (-2.0 * uy);
                        // d m2 / d Sigma2d = -(Sigma^-1 d)(Sigma^-1 d)^T
                        sa.cov[0] += dL_dm2 * (-ux * ux);
                        sa.cov[1] += dL_dm2 * (-ux * uy);
                        sa.cov[2] += dL_dm2 * (-uy * uy);
                    }
                }
            }
        }
    });

    // Reduce chunks in order, then chain image-space gradients to 3D params.
    std::vector<SplatAccum> total(n);
    for (int c = 0; c < chunks; c++)
        for (size_t i = 0; i < n; i++) {
            for (int k = 0; k < 3; k++) total[i].color[k] += acc[c][i].color[k];
            total[i].opacity += acc[c][i].opacity;
            for (int k = 0; k < 2; k++) total[i].mean2d[k] += acc[c][i].mean2d[k];
            for (int k = 0; k < 3; k++) total[i].cov[k] += acc[c][i].cov[k];
        }

    RenderGrads out;
    out.d_mean.assign(n, Vec3{});
    out.d_rotation.assign(n, {0, 0, 0, 0});
    out.d_scale.assign(n, Vec3{});
    out.d_opacity_logit.assign(n, 0.0);
    out.d_color.assign(n, Vec3{});

    Vec3 jx = fr.basis.right * fr.pixscale;
    Vec3 jy = fr.basis.up * (-fr.pixscale);
    for (size_t i = 0; i < n; i++) {
        const Splat& s = scene.splats[i];
        const SplatAccum& sa = total[i];
        out.d_color[i] = {sa.color[0], sa.color[1], sa.color[2]};
        double op = opacity_from_logit(s.opacity_logit);
        out.d_opacity_logit[i] = sa.opacity * op * (1.0 - op);
        out.d_mean[i] = jx * sa.mean2d[0] + jy * sa.mean2d[1];

        // dL/dSigma3 = sum_ab G2_ab j_a j_b^T with G2 = [[cxx, cxy], [cxy, cyy]].
        Mat3 g3;
        for (int r = 0; r < 3; r++)
            for (int col = 0; col < 3; col++) {
                double jxr = (&jx.x)[r], jxc = (&jx.x)[col];
                double jyr = (&jy.x)[r], jyc = (&jy.x)[col];
                g3(r, col) = sa.cov[0] * jxr * jxc + sa.cov[1] * (jxr * jyc + jyr * jxc) +
                             sa.cov[2] * jyr * jyc;
            }

        Quat q = s.rotation;
        double qn = norm(q);
        Quat u{q.w / qn, q.x / qn, q.y / qn, q.z / qn};
        Mat3 rot = rotation_matrix(u);
        Mat3 m;
        for (int r = 0; r < 3; r++) {
            m(r, 0) = rot(r, 0) * s.scale.x;
            m(r, 1) = rot(r, 1) * s.scale.y;
            m(r, 2) = rot(r, 2) * s.scale.z;
        }
        // Sigma3 = M M^T  =>  dL/dM = (G3 + G3^T) M = 2 G3 M (G3 symmetric).
        Mat3 dm = mul(g3, m);
        for (auto& v : dm.m) v *= 2.0;

        out.d_scale[i] = {dot(rot.col(0), dm.col(0)), dot(rot.col(1), dm.col(1)),
                          dot(rot.col(2), dm.col(2))};

        Mat3 drot;  // dL/dR = dL/dM diag(scale)
        for (int r = 0; r < 3; r++) {
            drot(r, 0) = dm(r, 0) * s.scale.x;
            drot(r, 1) = dm(r, 1) * s.scale.y;
            drot(r, 2) = dm(r, 2) * s.scale.z;
        }

        double w = u.w, x = u.x, y = u.y, z = u.z;
        // dR/d(unit quaternion component), rows r, cols c.
        const double dRw[9] = {0, -z, y, z, 0, -x, -y, x, 0};
        const double dRx[9] = {0, y, z, y, -2 * x, -w, z, w, -2 * x};
        const double dRy[9] = {-2 * y, x, w, x, 0, z, -w, z, -2 * y};
        const double dRz[9] = {-2 * z, -w, x, w, -2 * z, y, x, y, 0};
        double du[4] = {0, 0, 0, 0};
        for (int k = 0; k < 9; k++) {
            du[0] += 2.0 * dRw[k] * drot.m[k];
            du[1] += 2.0 * dRx[k] * drot.m[k];
            du[2] += 2.0 * dRy[k] * drot.m[k];
            du[3] += 2.0 * dRz[k] * drot.m[k];
        }
        // Through the normalization u = q/|q|.
        double udot = du[0] * u.w + du[1] * u.x + du[2] * u.y + du[3] * u.z;
        out.d_rotation[i] = {(du[0] - udot * u.w) / qn, (du[1] - udot * u.x) / qn,
                             (du[2] - udot * u.y) / qn, (du[3] - udot * u.z) / qn};
    }
    return out;
}

SplatWeights render_splat_weights(const GaussianScene& scene, const CameraPose& pose, int resolution) {
    Prepared p = prepare(scene, pose, resolution);
    size_t n = scene.splats.size();
    int chunks = (resolution + kRowChunk - 1) / kRowChunk;
    std::vector<std::vector<double>> acc(chunks);
    SplatWeights out;
    out.residual.assign(static_cast<size_t>(resolution) * resolution, 1.0);

    parallel_for(chunks, [&](int c_begin, int c_end) {
        for (int c = c_begin; c < c_end; c++) {
            acc[c].assign(n, 0.0);
            int y_begin = c * kRowChunk;
            int y_end = std::min(resolution, y_begin + kRowChunk);
            for (int y = y_begin; y < y_end; y++) {
                const std::vector<int>& cand = p.rows[y];
                double py = y + 0.5;
                for (int x = 0; x < resolution; x++) {
                    double px = x + 0.5;
                    double T = 1.0;
                    for (int idx : cand) {
                        const ProjectedSplat& s = p.proj[idx];
                        if (x < s.x0 || x >= s.x1) continue;
                        double dx = px - s.mean2d.x, dy = py - s.mean2d.y;
                        double m2 = mahalanobis2(s, dx, dy);
                        if (m2 >= kSupportRadius * kSupportRadius) continue;
                        double a = s.opacity * kernel(m2);
                        acc[c][idx] += a * T;
                        T *= 1.0 - a;
                        if (T < kTransmittanceStop) break;
                    }
                    out.residual[static_cast<size_t>(y) * resolution + x] = T;
                }
            }
        }
    });

    out.weight.assign(n, 0.0);
    for (int c = 0; c < chunks; c++)
        for (size_t i = 0; i < n; i++) out.weight[i] += acc[c][i];
    return out;
}

}  // namespace mvb
