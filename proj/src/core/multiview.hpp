#pragma once

#include <optional>
#include <vector>

#include "core/camera.hpp"
#include "core/image.hpp"

namespace mvb {

// A set of posed views moving through the pipeline. The stage tag records
// which processing step produced it:
//   generated - synthetic multi-view data conditioned on the front view
//   rendered  - renders of a reconstructed scene
//   noised    - diffusion latents (pixel range unconstrained)
//   refined   - output of diffusion refinement, back in [0,1]
struct MultiViewSet {
    enum class Stage { generated, rendered, noised, refined };

    Stage stage = Stage::rendered;
    std::vector<CameraPose> poses;
    std::vector<Image> views;
    std::optional<Image> condition;  // conditioning image, when one applies

    size_t size() const { return views.size(); }
};

inline const char* stage_name(MultiViewSet::Stage s) {
    switch (s) {
        case MultiViewSet::Stage::generated: return "generated";
        case MultiViewSet::Stage::rendered: return "rendered";
        case MultiViewSet::Stage::noised: return "noised";
        case MultiViewSet::Stage::refined: return "refined";
    }
    return "?";
}

}  // namespace mvb
