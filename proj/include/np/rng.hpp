#ifndef NP_RNG_HPP
#define NP_RNG_HPP

#include <cstdint>
#include <cmath>

namespace np {

// splitmix64; used both as a mixer for stream derivation and as the
// generator core. All randomness in the library flows through Rng
// instances handed down from the caller, never through globals.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(mix64(seed ^ 0xa02bdbf7bb3c0a7ULL)) {}

    std::uint64_t next_u64()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1); 53-bit resolution, identical on every platform
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // standard normal via Box-Muller (cached second value)
    double normal()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0x1.0p-60) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // independent substream; deterministic function of (this stream's seed, key)
    Rng split(std::uint64_t key) const { return Rng(mix64(state_ ^ mix64(key))); }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// stable stream key for a decision vector: hash of the raw double bits.
// Duplicate candidates get identical stochastic predictions this way,
// independent of their position in a batch.
inline std::uint64_t hash_doubles(const double* p, std::size_t n, std::uint64_t salt = 0)
{
    std::uint64_t h = mix64(salt ^ 0x51ed270b8a03ff2bULL);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        __builtin_memcpy(&bits, &p[i], sizeof(bits));
        h = mix64(h ^ bits);
    }
    return h;
}

} // namespace np

#endif
