#include "metrics/image_metrics.hpp"

#include <cmath>
#include <vector>

#include "core/error.hpp"

namespace mvb {

namespace {

void check_shapes(const Image& a, const Image& b, const char* op) {
    if (a.width != b.width || a.height != b.height)
        fail_param(std::string(op) + ": image shapes differ");
    if (a.width < 1 || a.height < 1) fail_param(std::string(op) + ": empty image");
}

std::vector<double> to_luma(const Image& img) {
    std::vector<double> out(static_cast<size_t>(img.width) * img.height);
    for (size_t i = 0; i < out.size(); ++i) {
        const double* px = img.data.data() + i * 3;
        out[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
    return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
    check_shapes(a, b, "psnr");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.data.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
    check_shapes(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (a.width < kWin || a.height < kWin)
        fail_param("ssim: both image dimensions must be at least 11");

    double win[kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        win[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        wsum += win[i];
    }
    for (double& w : win) w /= wsum;

    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);
    const int h = a.height, w = a.width;
    const int oh = h - kWin + 1, ow = w - kWin + 1;

    double total = 0.0;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < kWin; ++i) {
                for (int j = 0; j < kWin; ++j) {
                    const double wgt = win[i] * win[j];
                    const double va = la[static_cast<size_t>(y + i) * w + x + j];
                    const double vb = lb[static_cast<size_t>(y + i) * w + x + j];
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * (va * va);
                    sbb += wgt * (vb * vb);
                    // associate the product a*b first so the result is
                    // bit-identical under argument swap
                    sab += wgt * (va * vb);
                }
            }
            const double var_a = saa - ma * ma;
            const double var_b = sbb - mb * mb;
            const double cov = sab - ma * mb;
            total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                     ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
        }
    }
    return total / (static_cast<double>(oh) * ow);
}

}  // namespace mvb
