#pragma once

#include <cstdint>
#include <string_view>

namespace mvb {

// Deterministic, splittable random stream.
//
// Any piece of work that needs randomness derives its own child stream from a
// parent via child(tag) / child(tag, index), so results are reproducible
// bit-for-bit regardless of evaluation order or thread count. The generator is
// xoshiro256++ seeded through splitmix64; all integer arithmetic, so sequences
// are identical across platforms. Gaussians use the Marsaglia polar method
// (sqrt/log only) instead of std::normal_distribution, which is
// implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed);

    // Child streams. Tags are hashed (FNV-1a) into the key; the same
    // (seed, tag, index) always yields the same stream.
    Rng child(std::string_view tag) const;
    Rng child(std::string_view tag, uint64_t index) const;

    uint64_t next_u64();
    // Uniform in [0, 1).
    double next_double();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n);
    // Standard normal.
    double normal();

    uint64_t key() const { return key_; }

private:
    explicit Rng(uint64_t key, bool raw);

    uint64_t key_ = 0;
    uint64_t s_[4] = {0, 0, 0, 0};
    double spare_ = 0;
    bool has_spare_ = false;
};

}  // namespace mvb
