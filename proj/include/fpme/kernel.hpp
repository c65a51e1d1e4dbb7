#ifndef FPME_KERNEL_HPP
#define FPME_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace fpme {

inline void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 2.0))
        throw std::domain_error("gamma must lie in (0,2)");
}

namespace detail {

// Sum_{k >= N} k^{-s} by Euler-Maclaurin, s > 1, N moderately large.
inline double zeta_tail(double s, double N) {
    double t = std::pow(N, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(N, -s);
    // B_{2j}/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1}
    static const double coef[] = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0};
    double rising = s;
    double power = std::pow(N, -s - 1.0);
    for (int j = 0; j < 4; ++j) {
        t += coef[j] * rising * power;
        rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
        power /= N * N;
    }
    return t;
}

// Sum_{k=a}^{b} k^{-s}, small terms first.
inline double power_sum(double s, std::int64_t a, std::int64_t b) {
    double acc = 0.0;
    for (std::int64_t k = b; k >= a; --k) acc += std::pow(static_cast<double>(k), -s);
    return acc;
}

} // namespace detail

/// zeta(s) for s > 1 from a partial sum and an Euler-Maclaurin tail.
inline double zeta(double s) {
    constexpr std::int64_t N = 64;
    return detail::power_sum(s, 1, N - 1) + detail::zeta_tail(s, N);
}

/// c_gamma = 1 / (2 zeta(gamma+1)).
inline double normalizer(double gamma) {
    check_gamma(gamma);
    return 1.0 / (2.0 * zeta(gamma + 1.0));
}

/// delta_gamma: 0 below 1, 1/2 at 1, 1 above.
inline double delta_gamma(double gamma) {
    check_gamma(gamma);
    if (gamma < 1.0) return 0.0;
    if (gamma == 1.0) return 0.5;
    return 1.0;
}

/**
 * The jump law p(z) = c |z|^{-gamma-1}, z != 0, together with an
 * inverse-CDF sampler truncated to 0 < |z| <= L.
 */
class JumpKernel {
public:
    JumpKernel(double gamma, std::int64_t L) : gamma_(gamma), c_(normalizer(gamma)), L_(L) {
        if (L < 1) throw std::invalid_argument("truncation L must be positive");
        w_.resize(static_cast<std::size_t>(L) + 1);
        w_[0] = 0.0;
        for (std::int64_t z = 1; z <= L; ++z)
            w_[z] = c_ * std::pow(static_cast<double>(z), -gamma - 1.0);
        double half = 0.0;
        for (std::int64_t z = L; z >= 1; --z) half += w_[z];
        renorm_ = 2.0 * half;

        cdf_.resize(2 * static_cast<std::size_t>(L));
        double acc = 0.0;
        std::size_t i = 0;
        for (std::int64_t z = -L; z <= L; ++z) {
            if (z == 0) continue;
            acc += w_[std::llabs(z)] / renorm_;
            cdf_[i++] = acc;
        }
        cdf_.back() = 1.0;
    }

    double gamma() const { return gamma_; }
    double c_gamma() const { return c_; }
    std::int64_t truncation() const { return L_; }
    double renorm_mass() const { return renorm_; }
    const std::vector<double>& cdf_table() const { return cdf_; }

    double p(std::int64_t z) const {
        if (z == 0) return 0.0;
        std::int64_t a = std::llabs(z);
        if (a <= L_) return w_[a];
        return c_ * std::pow(static_cast<double>(a), -gamma_ - 1.0);
    }

    /// Sum_{|z| > d} p(z), d >= 0.
    double tail_mass(std::int64_t d) const {
        constexpr std::int64_t N = 64;
        double s = gamma_ + 1.0;
        if (d + 1 >= N) return 2.0 * c_ * detail::zeta_tail(s, static_cast<double>(d + 1));
        return 2.0 * c_ * (detail::power_sum(s, d + 1, N - 1) + detail::zeta_tail(s, N));
    }

    std::int64_t sample(Rng& rng) const {
        double u = rng.uniform();
        auto idx = static_cast<std::int64_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
        return idx < L_ ? idx - L_ : idx - L_ + 1;
    }

private:
    double gamma_;
    double c_;
    std::int64_t L_;
    double renorm_ = 0.0;
    std::vector<double> w_;
    std::vector<double> cdf_;
};

inline double p(std::int64_t z, const JumpKernel& k) { return k.p(z); }

inline std::int64_t sample_jump(const JumpKernel& k, Rng& rng) { return k.sample(rng); }

} // namespace fpme

#endif
