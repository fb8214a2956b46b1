#pragma once

#include "core/image.hpp"

namespace mvb {

// 10*log10(1/MSE) over all RGB samples, capped at 99 dB (the cap also stands
// in for +inf on identical images).
double psnr(const Image& a, const Image& b);

// Mean SSIM over the luminance channel (0.299/0.587/0.114), 11x11 Gaussian
// window with sigma 1.5, K1=0.01, K2=0.03, valid windows only. Needs both
// dimensions >= 11.
double ssim(const Image& a, const Image& b);

}  // namespace mvb
