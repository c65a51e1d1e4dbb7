#ifndef FPME_MEASURE_HPP
#define FPME_MEASURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"
#include "simulator.hpp"
#include "test_function.hpp"

namespace fpme {

/// pi^n(eta) = (1/n) sum_x eta(x) delta_{x/n}, with ring site i at x = i - N/2.
struct EmpiricalMeasure {
    const Configuration* eta;
    std::int64_t n;

    double mass() const { return static_cast<double>(eta->particle_count()) / static_cast<double>(n); }
    double position(std::int64_t i) const { return static_cast<double>(site_coordinate(i, eta->size())) / n; }

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::int64_t i = 0; i < eta->size(); ++i)
            if ((*eta)[i]) acc += f(position(i));
        return acc / n;
    }
};

/// <pi^n, G_s> = (1/n) sum_x G_s(x/n) eta(x)
inline double pair_empirical(const Configuration& eta, const TestFunction& G, double s, std::int64_t n) {
    return pairing(eta, G, s, n);
}

enum class Side { left, right };

/// Mean of the ell sites strictly left (x-ell..x-1) or right (x+1..x+ell) of x.
inline double box_average(const Configuration& eta, std::int64_t x, std::int64_t ell, Side side) {
    if (ell < 1) throw std::domain_error("box size must be >= 1");
    std::int64_t acc = 0;
    for (std::int64_t y = 1; y <= ell; ++y) acc += side == Side::right ? eta[x + y] : eta[x - y];
    return static_cast<double>(acc) / static_cast<double>(ell);
}

/// Left and right box averages at every ring site, by a sliding window.
struct BoxAverages {
    std::int64_t ell = 1;
    std::vector<double> left, right;

    BoxAverages(const Configuration& eta, std::int64_t ell_) : ell(ell_) {
        if (ell < 1) throw std::domain_error("box size must be >= 1");
        const std::int64_t N = eta.size();
        left.resize(static_cast<std::size_t>(N));
        right.resize(static_cast<std::size_t>(N));
        // running count of eta over {x-ell, ..., x-1}
        std::int64_t cl = 0, cr = 0;
        for (std::int64_t y = 1; y <= ell; ++y) {
            cl += eta[-y];
            cr += eta[y];
        }
        for (std::int64_t x = 0; x < N; ++x) {
            left[x] = static_cast<double>(cl) / ell;
            right[x] = static_cast<double>(cr) / ell;
            cl += eta[x] - eta[x - ell];
            cr += eta[x + ell + 1] - eta[x + 1];
        }
    }
};

/// floor(value), required to be at least 1.
inline std::int64_t box_size(double value, const char* what) {
    auto l = static_cast<std::int64_t>(std::floor(value));
    if (l < 1) throw std::invalid_argument(std::string(what) + " is below 1");
    return l;
}

/// H(mu | nu_b) for product measures.
inline double relative_entropy(const ProductMeasure& mu, double b) {
    if (!(b > 0.0 && b < 1.0)) throw std::domain_error("b must lie in (0,1)");
    mu.validate();
    double h = 0.0;
    for (double r : mu.profile) {
        if (r > 0.0) h += r * std::log(r / b);
        if (r < 1.0) h += (1.0 - r) * std::log((1.0 - r) / (1.0 - b));
    }
    return h;
}

inline double entropy_constant(double b) { return std::max(std::log(1.0 / b), std::log(1.0 / (1.0 - b))); }

/**
 * The four products entering the replacement: eta(x)eta(x+1),
 * <-eta^l(x) eta(x+1), <-eta^l(x) ->eta^L(x+1), <-eta^L(x) ->eta^L(x+1)
 * with l = floor(eps n^{gamma/2}) and L = floor(eps n).
 */
struct StageIntegrands {
    std::array<double, 4> level{}; // (1/n) sum_x Phi(s,x/n) * product_k
    double stage(int k) const { return level[k] - level[k + 1]; }
    double total() const { return level[0] - level[3]; }
};

inline StageIntegrands stage_integrands(const Configuration& eta, const TestFunction& Phi, double s, std::int64_t n,
                                        std::int64_t ell, std::int64_t L) {
    const std::int64_t N = eta.size();
    BoxAverages small(eta, ell), big(eta, L);
    StageIntegrands out;
    for (std::int64_t x = 0; x < N; ++x) {
        double phi = Phi(s, static_cast<double>(site_coordinate(x, N)) / n);
        if (phi == 0.0) continue;
        double e1 = eta[x + 1];
        out.level[0] += phi * eta[x] * e1;
        out.level[1] += phi * small.left[x] * e1;
        out.level[2] += phi * small.left[x] * big.right[x + 1 == N ? 0 : x + 1];
        out.level[3] += phi * big.left[x] * big.right[x + 1 == N ? 0 : x + 1];
    }
    for (auto& v : out.level) v /= n;
    return out;
}

struct StagedGaps {
    double gap1 = 0.0, gap2 = 0.0, gap3 = 0.0;
    double total = 0.0;            // replacement gap
    double telescoping_error = 0.0; // max over snapshots of |sum of stages - total integrand|
    std::int64_t ell = 0, L = 0;
};

/// Integrated absolute gaps on [0, t], trapezoid rule on the snapshot grid.
inline StagedGaps intermediate_gaps(const Trajectory& traj, const TestFunction& Phi, double eps, double t) {
    const std::int64_t n = traj.params.n;
    const double gamma = traj.params.gamma;
    StagedGaps g;
    g.ell = box_size(eps * std::pow(static_cast<double>(n), gamma / 2.0), "eps n^{gamma/2}");
    g.L = box_size(eps * static_cast<double>(n), "eps n");
    std::array<double, 4> acc{};
    StageIntegrands prev;
    double prev_t = 0.0;
    bool first = true, reached = false;
    for (const auto& [s, eta] : traj.snapshots) {
        if (s > t * (1.0 + 1e-12) + 1e-15) break;
        StageIntegrands cur = stage_integrands(eta, Phi, s, n, g.ell, g.L);
        double sum = cur.stage(0) + cur.stage(1) + cur.stage(2);
        g.telescoping_error = std::max(g.telescoping_error, std::abs(sum - cur.total()));
        if (!first) {
            double h = 0.5 * (s - prev_t);
            for (int k = 0; k < 3; ++k) acc[k] += h * (prev.stage(k) + cur.stage(k));
            acc[3] += h * (prev.total() + cur.total());
        }
        prev = cur;
        prev_t = s;
        first = false;
        if (std::abs(s - t) <= 1e-12 * std::max(1.0, t)) reached = true;
    }
    if (!reached) throw std::domain_error("intermediate_gaps: t is not on the record grid");
    g.gap1 = std::abs(acc[0]);
    g.gap2 = std::abs(acc[1]);
    g.gap3 = std::abs(acc[2]);
    g.total = std::abs(acc[3]);
    return g;
}

inline double replacement_gap(const Trajectory& traj, const TestFunction& Phi, double eps, double t) {
    return intermediate_gaps(traj, Phi, eps, t).total;
}

} // namespace fpme

#endif
