#ifndef FPME_LATTICE_HPP
#define FPME_LATTICE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kernel.hpp"
#include "rng.hpp"

namespace fpme {

/// Occupancy of a periodic ring of N sites; indices are taken modulo N.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::int64_t N) : occ_(static_cast<std::size_t>(N), 0) {
        if (N < 1) throw std::invalid_argument("configuration size must be positive");
    }
    Configuration(std::vector<std::uint8_t> occ) : occ_(std::move(occ)) {
        for (auto& v : occ_) {
            if (v > 1) throw std::invalid_argument("occupancy must be 0 or 1");
            count_ += v;
        }
    }

    std::int64_t size() const { return static_cast<std::int64_t>(occ_.size()); }
    std::int64_t particle_count() const { return count_; }

    std::int64_t wrap(std::int64_t x) const {
        std::int64_t N = size();
        x %= N;
        return x < 0 ? x + N : x;
    }
    int operator[](std::int64_t x) const { return occ_[static_cast<std::size_t>(wrap(x))]; }

    void set(std::int64_t x, int v) {
        auto& s = occ_[static_cast<std::size_t>(wrap(x))];
        count_ += static_cast<int>(v != 0) - s;
        s = static_cast<std::uint8_t>(v != 0);
    }
    void swap_sites(std::int64_t x, std::int64_t y) {
        std::size_t i = static_cast<std::size_t>(wrap(x)), j = static_cast<std::size_t>(wrap(y));
        std::swap(occ_[i], occ_[j]);
    }

    const std::vector<std::uint8_t>& occupancy() const { return occ_; }

    bool operator==(const Configuration& o) const { return occ_ == o.occ_; }
    bool operator!=(const Configuration& o) const { return !(*this == o); }

private:
    std::vector<std::uint8_t> occ_;
    std::int64_t count_ = 0;
};

inline void require_distinct(const Configuration& eta, std::int64_t x, std::int64_t y) {
    if (eta.wrap(x) == eta.wrap(y)) throw std::domain_error("sites must be distinct");
}

inline int xi(const Configuration& eta, std::int64_t x, std::int64_t y) {
    require_distinct(eta, x, y);
    return eta[x] != eta[y] ? 1 : 0;
}

/// eta(x-1) + eta(x+1) + eta(y-1) + eta(y+1), summed literally even when the sites overlap.
inline int tilde_c(const Configuration& eta, std::int64_t x, std::int64_t y) {
    require_distinct(eta, x, y);
    return eta[x - 1] + eta[x + 1] + eta[y - 1] + eta[y + 1];
}

/// c_{x,y}(eta) = tilde_c * xi
inline int c_xy(const Configuration& eta, std::int64_t x, std::int64_t y) {
    return tilde_c(eta, x, y) * xi(eta, x, y);
}

/// Signed displacement from x to y on the ring, in (-N/2, N/2].
inline std::int64_t ring_displacement(std::int64_t N, std::int64_t x, std::int64_t y) {
    std::int64_t d = (y - x) % N;
    if (d < 0) d += N;
    if (d > N / 2) d -= N;
    return d;
}

/**
 * Unordered-pair exchange rate p(y-x) c_{x,y}(eta) / 2. The displacement is the
 * minimal image on the ring; displacements beyond the kernel truncation carry rate 0.
 */
inline double rate_c(const Configuration& eta, std::int64_t x, std::int64_t y, const JumpKernel& k) {
    std::int64_t d = ring_displacement(eta.size(), x, y);
    if (std::llabs(d) > k.truncation()) {
        require_distinct(eta, x, y);
        return 0.0;
    }
    return k.p(d) * c_xy(eta, x, y) / 2.0;
}

struct IdentityPair {
    int lhs;
    int rhs;
};

/// c_{x,x+1}(eta) against xi_{x,x+1}(eta) [eta(x-1) + eta(x+2) + 1].
inline IdentityPair nn_rate_identity(const Configuration& eta, std::int64_t x) {
    int lhs = c_xy(eta, x, x + 1);
    int rhs = xi(eta, x, x + 1) * (eta[x - 1] + eta[x + 2] + 1);
    return {lhs, rhs};
}

inline Configuration exchange(Configuration eta, std::int64_t x, std::int64_t y) {
    require_distinct(eta, x, y);
    eta.swap_sites(x, y);
    return eta;
}

/// Bernoulli product measure with site marginals `profile`.
struct ProductMeasure {
    std::vector<double> profile;

    static ProductMeasure constant(std::int64_t N, double b) {
        return {std::vector<double>(static_cast<std::size_t>(N), b)};
    }
    void validate() const {
        for (double v : profile)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("profile values must lie in [0,1]");
    }
};

inline Configuration sample_configuration(const ProductMeasure& mu, Rng& rng) {
    mu.validate();
    std::vector<std::uint8_t> occ(mu.profile.size());
    for (std::size_t i = 0; i < occ.size(); ++i) occ[i] = rng.bernoulli(mu.profile[i]) ? 1 : 0;
    return Configuration(std::move(occ));
}

/// Deliberately wrong rate variants, used to check that the suites catch corrupted rates.
enum class RateMutation { none, negate_tilde_c, one_sided_tilde_c };

/**
 * Exact generator of the process on a ring of N <= 14 sites. States are the
 * bitmasks 0 .. 2^N - 1 (bit i = occupancy of site i). Off-diagonal rates are
 * stored per row; the diagonal holds minus the row sum.
 */
class SmallSystem {
public:
    static constexpr int kMaxSites = 14;

    struct Entry {
        std::uint32_t col;
        double rate;
    };

    SmallSystem(int N, double gamma, RateMutation mutation = RateMutation::none)
        : N_(N), kernel_(gamma, std::max<std::int64_t>(1, (N - 1) / 2)), mutation_(mutation) {
        if (N > kMaxSites) throw std::length_error("small system capacity is 14 sites");
        if (N < 3) throw std::invalid_argument("small system needs at least 3 sites");
        build();
    }

    int sites() const { return N_; }
    std::size_t states() const { return std::size_t{1} << N_; }
    const JumpKernel& kernel() const { return kernel_; }
    const std::vector<Entry>& row(std::size_t s) const { return rows_[s]; }
    double diagonal(std::size_t s) const { return diag_[s]; }

    double at(std::size_t i, std::size_t j) const {
        if (i == j) return diag_[i];
        for (const auto& e : rows_[i])
            if (e.col == j) return e.rate;
        return 0.0;
    }

    Configuration configuration(std::size_t s) const {
        std::vector<std::uint8_t> occ(static_cast<std::size_t>(N_));
        for (int i = 0; i < N_; ++i) occ[i] = (s >> i) & 1u;
        return Configuration(std::move(occ));
    }
    static std::size_t index(const Configuration& eta) {
        std::size_t s = 0;
        for (std::int64_t i = 0; i < eta.size(); ++i)
            if (eta[i]) s |= std::size_t{1} << i;
        return s;
    }

    /// (L g)(eta) for every state.
    std::vector<double> apply(const std::vector<double>& g) const {
        std::vector<double> out(states(), 0.0);
        for (std::size_t s = 0; s < states(); ++s) {
            double acc = diag_[s] * g[s];
            for (const auto& e : rows_[s]) acc += e.rate * g[e.col];
            out[s] = acc;
        }
        return out;
    }

    /// Product Bernoulli(b) weight of state s.
    double weight(std::size_t s, double b) const {
        int k = __builtin_popcountll(s);
        return std::pow(b, k) * std::pow(1.0 - b, N_ - k);
    }

    /// Unordered pairs {x,y} carrying a nonzero kernel weight, with their displacement.
    std::vector<std::pair<int, int>> pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int x = 0; x < N_; ++x)
            for (int y = x + 1; y < N_; ++y)
                if (std::llabs(ring_displacement(N_, x, y)) <= kernel_.truncation()) out.emplace_back(x, y);
        return out;
    }

private:
    int tilde(const Configuration& eta, int x, int y) const {
        switch (mutation_) {
        case RateMutation::none: return tilde_c(eta, x, y);
        case RateMutation::negate_tilde_c: return -tilde_c(eta, x, y);
        case RateMutation::one_sided_tilde_c: return 2 * (eta[x - 1] + eta[x + 1]);
        }
        return 0;
    }

    void build() {
        const std::size_t S = states();
        rows_.assign(S, {});
        diag_.assign(S, 0.0);
        const auto pr = pairs();
        for (std::size_t s = 0; s < S; ++s) {
            Configuration eta = configuration(s);
            double out = 0.0;
            for (auto [x, y] : pr) {
                if (xi(eta, x, y) == 0) continue;
                double r = kernel_.p(ring_displacement(N_, x, y)) * tilde(eta, x, y) / 2.0;
                if (r == 0.0) continue;
                auto t = static_cast<std::uint32_t>(s ^ ((std::size_t{1} << x) | (std::size_t{1} << y)));
                rows_[s].push_back({t, r});
                out += r;
            }
            diag_[s] = -out;
        }
    }

    int N_;
    JumpKernel kernel_;
    RateMutation mutation_;
    std::vector<std::vector<Entry>> rows_;
    std::vector<double> diag_;
};

inline SmallSystem build_generator(int N, double gamma, RateMutation mutation = RateMutation::none) {
    return SmallSystem(N, gamma, mutation);
}

struct GeneratorCheck {
    double max_row_sum;            // max |sum_j Q[i,j]|
    double min_off_diagonal;       // smallest off-diagonal entry
    double max_balance_violation;  // max |nu(i) Q[i,j] - nu(j) Q[j,i]|
    bool conserves_particles;
};

inline GeneratorCheck check_generator(const SmallSystem& sys, double b) {
    GeneratorCheck out{0.0, 0.0, 0.0, true};
    for (std::size_t s = 0; s < sys.states(); ++s) {
        double sum = sys.diagonal(s);
        for (const auto& e : sys.row(s)) {
            sum += e.rate;
            out.min_off_diagonal = std::min(out.min_off_diagonal, e.rate);
            if (__builtin_popcountll(s) != __builtin_popcountll(e.col)) out.conserves_particles = false;
            double v = sys.weight(s, b) * e.rate - sys.weight(e.col, b) * sys.at(e.col, s);
            out.max_balance_violation = std::max(out.max_balance_violation, std::abs(v));
        }
        out.max_row_sum = std::max(out.max_row_sum, std::abs(sum));
    }
    return out;
}

struct DirichletForms {
    double D;    // full form
    double D_NN; // nearest-neighbour part without the kinetic constraint
};

/**
 * D(sqrt f, nu_b) = (1/4) sum_{x,y} p(y-x) E_nu[c_{x,y} (sqrt f(eta^{x,y}) - sqrt f(eta))^2]
 * and D_NN, the same sum over |x-y| = 1 with c replaced by 1.
 */
inline DirichletForms dirichlet_form(const SmallSystem& sys, const std::vector<double>& f, double b) {
    if (f.size() != sys.states()) throw std::invalid_argument("density has wrong length");
    double total = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
        if (!(f[s] >= 0.0)) throw std::domain_error("density must be nonnegative");
        total += f[s] * sys.weight(s, b);
    }
    if (std::abs(total - 1.0) > 1e-10) throw std::domain_error("density must integrate to 1 under nu_b");
    DirichletForms out{0.0, 0.0};
    const int N = sys.sites();
    const auto pr = sys.pairs();
    for (std::size_t s = 0; s < sys.states(); ++s) {
        Configuration eta = sys.configuration(s);
        double nu = sys.weight(s, b);
        double sf = std::sqrt(f[s]);
        for (auto [x, y] : pr) {
            if (xi(eta, x, y) == 0) continue; // eta^{x,y} = eta
            std::size_t t = s ^ ((std::size_t{1} << x) | (std::size_t{1} << y));
            double diff = std::sqrt(f[t]) - sf;
            std::int64_t d = ring_displacement(N, x, y);
            double pd = sys.kernel().p(d);
            // each unordered pair stands for two ordered terms of the 1/4-weighted sum
            out.D += 0.5 * pd * nu * c_xy(eta, x, y) * diff * diff;
            if (std::llabs(d) == 1) out.D_NN += 0.5 * pd * nu * diff * diff;
        }
    }
    return out;
}

/// Row s0 of exp(tQ) by uniformization, truncated once the Poisson weights left are below tol.
inline std::vector<double> transition_row(const SmallSystem& sys, std::size_t s0, double t, double tol = 1e-14) {
    double lambda = 0.0;
    for (std::size_t s = 0; s < sys.states(); ++s) lambda = std::max(lambda, -sys.diagonal(s));
    std::vector<double> v(sys.states(), 0.0), out(sys.states(), 0.0);
    v[s0] = 1.0;
    if (lambda == 0.0 || t == 0.0) return v;
    const double lt = lambda * t;
    double weight = std::exp(-lt), used = 0.0;
    for (int k = 0;; ++k) {
        for (std::size_t s = 0; s < v.size(); ++s) out[s] += weight * v[s];
        used += weight;
        if (1.0 - used < tol && k > lt) break;
        // v <- v (I + Q / lambda)
        std::vector<double> next(v.size(), 0.0);
        for (std::size_t s = 0; s < v.size(); ++s) {
            if (v[s] == 0.0) continue;
            next[s] += v[s] * (1.0 + sys.diagonal(s) / lambda);
            for (const auto& e : sys.row(s)) next[e.col] += v[s] * e.rate / lambda;
        }
        v.swap(next);
        weight *= lt / (k + 1);
        if (k > 100000) throw std::runtime_error("uniformization did not converge");
    }
    return out;
}

/// <g, h>_{nu_b}
inline double inner_product(const SmallSystem& sys, const std::vector<double>& g, const std::vector<double>& h,
                            double b) {
    double acc = 0.0;
    for (std::size_t s = 0; s < sys.states(); ++s) acc += sys.weight(s, b) * g[s] * h[s];
    return acc;
}

} // namespace fpme

#endif
