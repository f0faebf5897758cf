#pragma once

#include <cmath>
#include <cstdint>

namespace quench {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Vigna / Steele-Lea-Flood).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Named sub-streams of a master seed. Every draw in the project is addressed
// as (seed, stream, entity id), so a sampled value never depends on the order
// in which other entities were visited, nor on thread count.
enum class Stream : std::uint64_t {
    Coupling = 1,
    Field = 2,
    HopfieldPattern = 3,
    InitConfig = 4,
    Trajectory = 5,
    Replicate = 6,
    Meta = 7,
};

// splitmix64 sequence whose start state is a hash of (seed, stream, entity).
class Rng {
public:
    Rng(std::uint64_t seed, Stream stream, std::uint64_t entity = 0) {
        std::uint64_t h = mix64(seed + kGolden);
        h = mix64(h ^ (static_cast<std::uint64_t>(stream) + kGolden));
        state_ = mix64(h ^ (entity + kGolden));
    }

    std::uint64_t next() {
        state_ += kGolden;
        return mix64(state_);
    }

    // uniform on [0,1), 53-bit resolution
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform on the open interval (0,1); safe under log()
    double u01_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    // strictly positive Exp(1) variate
    double exponential() { return -std::log(u01_open()); }

    double uniform(double a, double b) { return a + (b - a) * u01(); }

    // Box-Muller, cosine branch; consumes two uniforms per draw
    double normal(double mu, double sigma) {
        const double r = std::sqrt(-2.0 * std::log(u01_open()));
        const double theta = 6.283185307179586476925286766559 * u01();
        return mu + sigma * r * std::cos(theta);
    }

    // inverse CDF
    double cauchy(double x0, double gamma) {
        return x0 + gamma * std::tan(3.14159265358979323846 * (u01_open() - 0.5));
    }

    bool bernoulli(double p) { return u01() < p; }

    int pm_one() { return (next() >> 63) ? 1 : -1; }

    // uniform integer in [0, n); Lemire reduction
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_ = 0;
};

// 64-bit sub-seed for a derived entity (e.g. per-replicate seeds).
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t entity) {
    return Rng(seed, stream, entity).next();
}

} // namespace quench
