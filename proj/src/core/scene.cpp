#include "core/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace mvb {

double opacity_from_logit(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double logit_from_opacity(double opacity) { return std::log(opacity) - std::log(1.0 - opacity); }

void validate_scene(const GaussianScene& scene, double mean_limit) {
    for (size_t i = 0; i < scene.splats.size(); i++) {
        const Splat& s = scene.splats[i];
        auto bad = [&](const std::string& what) {
            fail_param("splat " + std::to_string(i) + ": " + what);
        };
        for (double v : {s.mean.x, s.mean.y, s.mean.z, s.rotation.w, s.rotation.x, s.rotation.y,
                         s.rotation.z, s.scale.x, s.scale.y, s.scale.z, s.opacity_logit, s.color.x,
                         s.color.y, s.color.z})
            if (!std::isfinite(v)) bad("non-finite field");
        if (std::abs(norm(s.rotation) - 1.0) > 1e-6) bad("rotation not unit length");
        if (!(s.scale.x > 0 && s.scale.y > 0 && s.scale.z > 0)) bad("non-positive scale");
        for (double c : {s.color.x, s.color.y, s.color.z})
            if (!(c >= 0.0 && c <= 1.0)) bad("color outside [0,1]");
        for (double m : {s.mean.x, s.mean.y, s.mean.z})
            if (std::abs(m) > mean_limit) bad("mean outside bounds");
    }
}

void save_scene(const GaussianScene& scene, const std::string& path) {
    std::ofstream f(path);
    if (!f) fail_data("cannot open scene file for writing: " + path);
    f << "MVB-GS v1 " << scene.splats.size() << "\n";
    char line[512];
    for (const Splat& s : scene.splats) {
        std::snprintf(line, sizeof(line),
                      "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                      s.mean.x, s.mean.y, s.mean.z, s.rotation.w, s.rotation.x, s.rotation.y,
                      s.rotation.z, s.scale.x, s.scale.y, s.scale.z, s.opacity_logit, s.color.x,
                      s.color.y, s.color.z);
        f << line;
    }
    if (!f) fail_data("short write to scene file: " + path);
}

GaussianScene load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_data("cannot open scene file: " + path);
    std::string magic, version;
    size_t count = 0;
    if (!(f >> magic >> version >> count) || magic != "MVB-GS" || version != "v1")
        fail_data("bad scene header in " + path);
    GaussianScene scene;
    scene.splats.resize(count);
    for (size_t i = 0; i < count; i++) {
        Splat& s = scene.splats[i];
        if (!(f >> s.mean.x >> s.mean.y >> s.mean.z >> s.rotation.w >> s.rotation.x >>
              s.rotation.y >> s.rotation.z >> s.scale.x >> s.scale.y >> s.scale.z >>
              s.opacity_logit >> s.color.x >> s.color.y >> s.color.z))
            fail_data("truncated scene file " + path + " at splat " + std::to_string(i));
    }
    return scene;
}

}  // namespace mvb
