#pragma once

#include <string>
#include <vector>

namespace mvb {

// Dense RGB raster, row-major, double per channel. Rendered/loaded content
// lives in [0,1]; buffers holding diffusion latents may leave that range
// (callers tag those via MultiViewSet::Stage), so the range is validated where
// it matters rather than enforced in the type.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // height * width * 3

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
    bool finite() const;
    bool in_unit_range() const;
};

// 8-bit RGB PNG. Values are mapped byte/255 on load and round(v*255) with
// clamping on store, so a write/read round trip is exact up to quantization.
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

}  // namespace mvb
