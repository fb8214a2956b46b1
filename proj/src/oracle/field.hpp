#pragma once

#include <vector>

#include "core/rng.hpp"

namespace mvb {

// Number of disjoint spectral buckets available to SmoothField2D. Fields built
// with different family indices have no Fourier mode in common, so their
// sample correlation over any uniform grid finer than twice the highest mode
// frequency is zero up to rounding.
inline constexpr int kFieldFamilies = 8;

// Smooth low-frequency scalar field over the unit square with zero mean and
// rms exactly 0.5 on uniform grids. The field is a random superposition of
// integer-lattice sinusoids (periods between ~1/9 and 1 of the domain) drawn
// from the spectral bucket selected by `family`; distinct integer modes are
// orthogonal, which makes fields from different families exactly
// uncorrelated rather than just statistically so. All randomness (mode
// choice, Gaussian amplitudes, phases) is consumed at construction; sampling
// is pure.
class SmoothField2D {
public:
    SmoothField2D(Rng& rng, int family);
    double sample(double u, double v) const;

private:
    struct Mode {
        double fx, fy, amp, phase;
    };
    std::vector<Mode> modes_;
};

}  // namespace mvb
