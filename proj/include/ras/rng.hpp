#ifndef RAS_RNG_HPP
#define RAS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ras {

// Deterministic RNG with implementation-independent distributions.
// std::uniform_real_distribution / std::normal_distribution are not
// portable across standard libraries, so the mappings are spelled out.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // expand the seed with splitmix64, then run xorshift128+
        auto next = [&seed]() {
            seed += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = seed;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        };
        s0_ = next();
        s1_ = next();
        if (s0_ == 0 && s1_ == 0) s1_ = 1;
    }

    std::uint64_t next_u64() {
        // xorshift128+ seeded via splitmix64
        std::uint64_t x = s0_;
        const std::uint64_t y = s1_;
        s0_ = y;
        x ^= x << 23;
        s1_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return s1_ + y;
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box-Muller, discarding the second value for simplicity
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    std::uint64_t s0_ = 0;
    std::uint64_t s1_ = 1;
};

// FNV-1a, used for per-stem dataset seeding and golden-output hashing.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

} // namespace ras

#endif
