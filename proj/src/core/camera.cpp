#include "core/camera.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvb {

const std::array<const char*, 6> kRigLabels = {"front", "front_right", "right",
                                               "back",  "left",        "front_left"};

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
const std::array<double, 6> kRigAzimuths = {0, 45, 90, 180, 270, 315};
}  // namespace

void validate_pose(const CameraPose& pose) {
    if (!(pose.azimuth_deg >= 0.0 && pose.azimuth_deg < 360.0))
        fail_param("camera azimuth out of [0,360): " + std::to_string(pose.azimuth_deg));
    if (!(pose.elevation_deg >= -90.0 && pose.elevation_deg <= 90.0))
        fail_param("camera elevation out of [-90,90]: " + std::to_string(pose.elevation_deg));
    if (!(pose.ortho_half_extent > 0.0)) fail_param("camera half extent must be positive");
}

CameraPose make_pose(double azimuth_deg, double elevation_deg, double half_extent, std::string label) {
    CameraPose p{azimuth_deg, elevation_deg, half_extent, std::move(label)};
    validate_pose(p);
    return p;
}

CameraBasis camera_basis(const CameraPose& pose) {
    double az = pose.azimuth_deg * kDegToRad;
    double el = pose.elevation_deg * kDegToRad;
    // Camera sits along +dir looking back at the origin.
    Vec3 dir{std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el)};
    Vec3 forward = dir * -1.0;
    Vec3 world_up{0, 1, 0};
    // Near the poles the view axis degenerates with world up; fall back to an
    // azimuth-consistent horizontal axis.
    if (std::abs(std::cos(el)) < 1e-9) world_up = Vec3{std::sin(az), 0, std::cos(az)} * (el > 0 ? 1.0 : -1.0);
    Vec3 right = normalized(cross(forward, world_up));
    Vec3 up = cross(right, forward);
    return {right, up, forward};
}

CanonicalRig make_canonical_rig(double half_extent) {
    if (!(half_extent > 0.0)) fail_param("rig half extent must be positive");
    CanonicalRig rig;
    for (int i = 0; i < kRigViews; i++)
        rig.poses[i] = make_pose(kRigAzimuths[i], 0.0, half_extent, kRigLabels[i]);
    return rig;
}

}  // namespace mvb
