#ifndef FPME_RNG_HPP
#define FPME_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace fpme {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for replica k of a run seeded with `seed`.
inline std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t k) {
    return splitmix64(splitmix64(seed) ^ splitmix64(k + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t bits() { return eng_(); }

    // uniform on [0,1) with 53 random bits
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

    // uniform integer in [0, k)
    std::uint64_t below(std::uint64_t k) {
        // Lemire's multiply-shift with rejection
        std::uint64_t x = eng_();
        __uint128_t m = static_cast<__uint128_t>(x) * k;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < k) {
            std::uint64_t t = (0 - k) % k;
            while (lo < t) {
                x = eng_();
                m = static_cast<__uint128_t>(x) * k;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace fpme

#endif
