#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace calib::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic sub-stream seed: same (base, tag) always yields the same
// seed, distinct tags give decorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return splitmix64(base + 0x9e3779b97f4a7c15ULL * (tag + 1));
}

// mt19937_64 with explicit uniform/Gaussian draws so the sampled sequence is
// pinned by this code rather than by library internals.
class Engine {
public:
    explicit Engine(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // integer in [0, k), Lemire multiply-shift
    std::uint64_t below(std::uint64_t k) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * k) >> 64);
    }

    // Box-Muller without caching: one value per call, two uniforms consumed.
    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace calib::rng
