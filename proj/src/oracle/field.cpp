#include "oracle/field.hpp"

#include <cmath>
#include <cstdint>

#include "core/error.hpp"

namespace mvb {

namespace {

constexpr int kMaxRadius = 9;       // highest mode frequency, cycles per unit
constexpr int kModesPerField = 12;  // modes drawn per field (without replacement)
constexpr double kTargetRms = 0.5;

// Stable bucket assignment for an integer frequency vector. FNV-1a keeps the
// buckets well mixed in direction and magnitude.
int bucket_of(int fx, int fy) {
    std::uint64_t h = 1469598103934665603ull;
    const int vals[4] = {(fx + 16) & 0xff, ((fx + 16) >> 8) & 0xff, (fy + 16) & 0xff,
                         ((fy + 16) >> 8) & 0xff};
    for (int v : vals) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
    }
    return static_cast<int>(h % static_cast<std::uint64_t>(kFieldFamilies));
}

}  // namespace

SmoothField2D::SmoothField2D(Rng& rng, int family) {
    if (family < 0) fail_param("SmoothField2D: family must be non-negative");
    family %= kFieldFamilies;

    // Canonical half-plane of integer frequency vectors: (fx > 0) or
    // (fx == 0, fy > 0). The mirrored vector is the same sinusoid with a
    // shifted phase, so one representative per mode suffices.
    std::vector<std::pair<int, int>> bucket;
    for (int fx = 0; fx <= kMaxRadius; fx++) {
        for (int fy = -kMaxRadius; fy <= kMaxRadius; fy++) {
            if (fx == 0 && fy <= 0) continue;
            int r2 = fx * fx + fy * fy;
            if (r2 < 1 || r2 > kMaxRadius * kMaxRadius) continue;
            if (bucket_of(fx, fy) == family) bucket.emplace_back(fx, fy);
        }
    }
    if (bucket.empty()) fail_numeric("SmoothField2D: empty spectral bucket");

    // Partial Fisher-Yates: pick kModesPerField distinct modes.
    size_t want = std::min<size_t>(kModesPerField, bucket.size());
    for (size_t i = 0; i < want; i++) {
        size_t j = i + static_cast<size_t>(rng.next_below(static_cast<std::uint64_t>(bucket.size() - i)));
        std::swap(bucket[i], bucket[j]);
    }
    bucket.resize(want);

    double sumsq = 0.0;
    modes_.reserve(want);
    for (auto [fx, fy] : bucket) {
        Mode m;
        m.fx = static_cast<double>(fx);
        m.fy = static_cast<double>(fy);
        m.amp = rng.normal();
        m.phase = rng.uniform(0.0, 2.0 * M_PI);
        sumsq += m.amp * m.amp;
        modes_.push_back(m);
    }
    // Each unit-amplitude sinusoid has mean square exactly 1/2 over the
    // domain (and over any uniform grid finer than twice the top frequency),
    // and distinct modes are orthogonal, so rms(field) = sqrt(sum amp^2 / 2).
    // Rescale to make that exactly kTargetRms.
    double rms = std::sqrt(sumsq / 2.0);
    if (rms < 1e-12) {
        modes_.clear();  // all-zero draw; field degenerates to 0
        return;
    }
    double scale = kTargetRms / rms;
    for (Mode& m : modes_) m.amp *= scale;
}

double SmoothField2D::sample(double u, double v) const {
    double s = 0.0;
    for (const Mode& m : modes_)
        s += m.amp * std::sin(2.0 * M_PI * (m.fx * u + m.fy * v) + m.phase);
    return s;
}

}  // namespace mvb
