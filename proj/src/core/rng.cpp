#include "core/rng.hpp"

#include <cmath>

namespace mvb {

namespace {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t mix_keys(uint64_t a, uint64_t b) {
    uint64_t state = a ^ rotl(b, 31);
    uint64_t out = splitmix64(state);
    return out ^ splitmix64(state);
}

}  // namespace

Rng::Rng(uint64_t seed) : Rng(seed, true) {}

Rng::Rng(uint64_t key, bool) : key_(key) {
    uint64_t state = key;
    // Expand the key into four nonzero state words.
    for (auto& w : s_) w = splitmix64(state);
}

Rng Rng::child(std::string_view tag) const { return Rng(mix_keys(key_, fnv1a(tag)), true); }

Rng Rng::child(std::string_view tag, uint64_t index) const {
    return Rng(mix_keys(mix_keys(key_, fnv1a(tag)), index * 0x9e3779b97f4a7c15ULL + 1), true);
}

uint64_t Rng::next_u64() {
    // xoshiro256++
    uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

uint64_t Rng::next_below(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * next_double() - 1.0;
        v = 2.0 * next_double() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

}  // namespace mvb
