#include "metrics/perceptual.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvb {

using grad::Tensor;

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// 5-tap Gaussian (sigma 1), normalized; small enough to fit the coarsest
// dyadic scale.
const std::vector<double>& ssim_window() {
    static const std::vector<double> k = [] {
        std::vector<double> w(5);
        double s = 0.0;
        for (int i = 0; i < 5; ++i) {
            const double d = i - 2.0;
            w[i] = std::exp(-d * d / 2.0);
            s += w[i];
        }
        for (double& v : w) v /= s;
        return w;
    }();
    return k;
}

Tensor ssim_mean(const Tensor& la, const Tensor& lb) {
    using namespace grad;
    const auto& win = ssim_window();
    Tensor mu_a = conv_sep_valid(la, win);
    Tensor mu_b = conv_sep_valid(lb, win);
    Tensor saa = conv_sep_valid(mul(la, la), win);
    Tensor sbb = conv_sep_valid(mul(lb, lb), win);
    Tensor sab = conv_sep_valid(mul(la, lb), win);
    Tensor var_a = sub(saa, mul(mu_a, mu_a));
    Tensor var_b = sub(sbb, mul(mu_b, mu_b));
    Tensor cov = sub(sab, mul(mu_a, mu_b));
    Tensor num = mul(add_scalar(scale(mul(mu_a, mu_b), 2.0), kC1),
                     add_scalar(scale(cov, 2.0), kC2));
    Tensor den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), kC1),
                     add_scalar(add(var_a, var_b), kC2));
    return mean(divide(num, den));
}

Tensor sobel_mag(const Tensor& l) {
    using namespace grad;
    // 1/8-normalized Sobel so magnitudes stay within the pixel range
    const std::array<double, 9> kx = {-0.125, 0, 0.125, -0.25, 0, 0.25, -0.125, 0, 0.125};
    const std::array<double, 9> ky = {-0.125, -0.25, -0.125, 0, 0, 0, 0.125, 0.25, 0.125};
    Tensor gx = conv3x3_valid(l, kx);
    Tensor gy = conv3x3_valid(l, ky);
    return sqrt_t(add_scalar(add(mul(gx, gx), mul(gy, gy)), 1e-12));
}

}  // namespace

Tensor perceptual_graph(const Tensor& a, const Tensor& b, int resolution) {
    using namespace grad;
    const auto& sa = a.shape();
    if (sa != b.shape()) fail_param("perceptual: image shapes differ");
    if (sa.size() != 3 || sa[2] != 3 || sa[0] != sa[1])
        fail_param("perceptual: expected square (h,w,3) inputs");
    if (resolution < 20)
        fail_param("perceptual: resolution must be at least 20 for 3 dyadic scales");
    if (sa[0] < resolution || sa[0] % resolution != 0)
        fail_param("perceptual: input size must be a multiple of the proxy resolution");

    Tensor la = luma(a);
    Tensor lb = luma(b);
    if (sa[0] != resolution) {
        const int f = sa[0] / resolution;
        la = downsample_area(la, f);
        lb = downsample_area(lb, f);
    }

    Tensor s0 = ssim_mean(la, lb);
    Tensor la1 = avgpool2(la), lb1 = avgpool2(lb);
    Tensor s1 = ssim_mean(la1, lb1);
    Tensor la2 = avgpool2(la1), lb2 = avgpool2(lb1);
    Tensor s2 = ssim_mean(la2, lb2);
    Tensor ms = scale(add(add(s0, s1), s2), 1.0 / 3.0);

    // Smooth L1 that is exactly zero at zero: sqrt(d^2+eps) - sqrt(eps).
    const double off = std::sqrt(1e-12);
    Tensor d = sub(sobel_mag(la), sobel_mag(lb));
    Tensor edge = mean(add_scalar(abs_smooth(d), -off));

    Tensor ssim_term = scale(add_scalar(neg(ms), 1.0), 0.5);
    return add(ssim_term, scale(edge, 0.5));
}

double perceptual_proxy(const Image& a, const Image& b, int resolution) {
    return perceptual_graph(image_to_tensor(a), image_to_tensor(b), resolution).value();
}

Tensor image_to_tensor(const Image& img, bool requires_grad) {
    if (img.width < 1 || img.height < 1) fail_param("image_to_tensor: empty image");
    return Tensor::from({img.height, img.width, 3}, img.data, requires_grad);
}

Image tensor_to_image(const grad::Tensor& t) {
    const auto& sh = t.shape();
    if (sh.size() != 3 || sh[2] != 3) fail_param("tensor_to_image: expected (h,w,3)");
    Image img;
    img.height = sh[0];
    img.width = sh[1];
    img.data = t.data();
    return img;
}

}  // namespace mvb
