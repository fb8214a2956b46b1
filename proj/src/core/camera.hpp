#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/vec.hpp"

namespace mvb {

// Orthographic camera orbiting the origin. Azimuth in degrees [0, 360),
// elevation in [-90, 90]; azimuth 0 / elevation 0 is the front view looking
// down -z with y up. The frustum spans [-half_extent, half_extent] in camera
// x/y; world content is expected inside the unit-ish cube, so the default
// extent leaves margin around it.
struct CameraPose {
    double azimuth_deg = 0;
    double elevation_deg = 0;
    double ortho_half_extent = 1.2;
    std::string label;
};

// Orthonormal view frame: pixels map along `right`/`up`, `forward` points into
// the scene, so smaller dot(p, forward) means closer to the camera.
struct CameraBasis {
    Vec3 right, up, forward;
};

CameraBasis camera_basis(const CameraPose& pose);
CameraPose make_pose(double azimuth_deg, double elevation_deg, double half_extent, std::string label = "");
void validate_pose(const CameraPose& pose);

// The six canonical viewpoints, in order:
// front(0), front_right(45), right(90), back(180), left(270), front_left(315),
// all at elevation 0 with a shared extent.
struct CanonicalRig {
    std::array<CameraPose, 6> poses;
};

inline constexpr int kRigViews = 6;
extern const std::array<const char*, 6> kRigLabels;

CanonicalRig make_canonical_rig(double half_extent);

}  // namespace mvb
