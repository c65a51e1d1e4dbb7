#ifndef FPME_SIMULATOR_HPP
#define FPME_SIMULATOR_HPP

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kernel.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "test_function.hpp"

namespace fpme {

struct SimParams {
    std::int64_t n = 64;
    double gamma = 1.0;
    double T = 1.0;          // macroscopic horizon
    std::uint64_t seed = 1;
    double W = 8.0;          // macroscopic window width, ring size N = n W
    std::vector<double> record_times{0.0, 1.0};

    std::int64_t ring_size() const { return std::llround(static_cast<double>(n) * W); }

    void validate() const {
        if (n < 1) throw std::invalid_argument("n must be >= 1");
        check_gamma(gamma);
        if (!(T > 0.0)) throw std::invalid_argument("horizon must be positive");
        if (std::abs(static_cast<double>(n) * W - static_cast<double>(ring_size())) > 1e-9)
            throw std::invalid_argument("n * W must be an integer");
        if (ring_size() < 3) throw std::invalid_argument("ring must have at least 3 sites");
        double prev = -1.0;
        for (double t : record_times) {
            if (t < 0.0 || t > T) throw std::invalid_argument("record times must lie in [0, T]");
            if (t < prev) throw std::invalid_argument("record times must be sorted");
            prev = t;
        }
    }
};

/// Uniform record grid with k intervals on [0, T].
inline std::vector<double> uniform_grid(double T, int k) {
    std::vector<double> g(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i <= k; ++i) g[i] = T * i / k;
    return g;
}

/// Ring site i sits at lattice coordinate i - N/2, i.e. at macroscopic position (i - N/2)/n.
inline std::int64_t site_coordinate(std::int64_t i, std::int64_t N) { return i - N / 2; }

/// Truncated jump law for a ring of N sites: displacements up to (N-1)/2.
inline JumpKernel ring_kernel(double gamma, std::int64_t N) {
    return JumpKernel(gamma, std::max<std::int64_t>(1, (N - 1) / 2));
}

struct DynkinRecord {
    TestFunction G;
    std::vector<double> values; // M_t(G) at each record time
};

struct Trajectory {
    SimParams params;
    std::vector<std::pair<double, Configuration>> snapshots;
    std::int64_t event_count = 0;
    std::int64_t proposal_count = 0;
    double wall_seconds = 0.0;
    std::vector<DynkinRecord> dynkin; // filled in diagnostic mode

    const Configuration& at(double t) const {
        for (const auto& [s, c] : snapshots)
            if (std::abs(s - t) <= 1e-12 * std::max(1.0, std::abs(t))) return c;
        throw std::domain_error("time is not on the record grid");
    }
};

/// Observer that ignores everything.
struct NullObserver {
    void interval(double, double, const Configuration&) {}
    void event(double, std::int64_t, std::int64_t, const Configuration&) {}
    void record(std::size_t, double) {}
};

namespace detail {

class ParticleIndex {
public:
    explicit ParticleIndex(const Configuration& eta) : where_(static_cast<std::size_t>(eta.size()), -1) {
        for (std::int64_t i = 0; i < eta.size(); ++i)
            if (eta[i]) {
                where_[i] = static_cast<std::int64_t>(pos_.size());
                pos_.push_back(i);
            }
    }
    std::int64_t size() const { return static_cast<std::int64_t>(pos_.size()); }
    std::int64_t operator[](std::int64_t k) const { return pos_[k]; }
    void move(std::int64_t from, std::int64_t to) {
        std::int64_t k = where_[from];
        pos_[k] = to;
        where_[to] = k;
        where_[from] = -1;
    }

private:
    std::vector<std::int64_t> where_;
    std::vector<std::int64_t> pos_;
};

} // namespace detail

/**
 * Simulates the process with generator n^gamma L on the ring by thinning.
 * Candidates (x uniform among particles, z from the truncated law) arrive at
 * rate n^gamma * K * renorm_mass * 2 and are accepted with probability
 * c_{x,x+z}(eta)/4, which yields pair rate n^gamma p(z) c / 2.
 */
template <class Observer>
Trajectory run(const Configuration& initial, const SimParams& params, Observer& obs) {
    params.validate();
    const std::int64_t N = params.ring_size();
    if (initial.size() != N) throw std::invalid_argument("initial configuration size must equal n * W");
    auto t_start = std::chrono::steady_clock::now();

    Trajectory traj;
    traj.params = params;
    Configuration eta = initial;
    const JumpKernel kernel = ring_kernel(params.gamma, N);
    Rng rng(params.seed);
    detail::ParticleIndex particles(eta);
    const std::int64_t K = particles.size();
    const double scale = std::pow(static_cast<double>(params.n), params.gamma);
    const double bound = scale * static_cast<double>(K) * kernel.renorm_mass() * 2.0;

    std::size_t next_rec = 0;
    const auto& rec = params.record_times;
    double t = 0.0;
    auto advance_to = [&](double t_new) {
        // split [t, t_new] at record times, recording those that are reached
        while (next_rec < rec.size() && rec[next_rec] <= t_new) {
            obs.interval(t, rec[next_rec], eta);
            t = rec[next_rec];
            traj.snapshots.emplace_back(t, eta);
            obs.record(next_rec, t);
            ++next_rec;
        }
        if (t_new > t) obs.interval(t, t_new, eta);
        t = t_new;
    };

    if (K == 0 || K == N) {
        advance_to(params.T);
    } else {
        for (;;) {
            double t_next = t + rng.exponential(bound);
            if (t_next > params.T) {
                advance_to(params.T);
                break;
            }
            advance_to(t_next);
            ++traj.proposal_count;
            std::int64_t x = particles[static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(K)))];
            std::int64_t y = eta.wrap(x + kernel.sample(rng));
            if (eta[y]) continue;
            int c = tilde_c(eta, x, y);
            assert(c >= 0 && c <= 4);
            if (rng.uniform() * 4.0 >= c) continue;
            eta.swap_sites(x, y);
            particles.move(x, y);
            ++traj.event_count;
            obs.event(t, x, y, eta);
        }
    }
    traj.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return traj;
}

inline Trajectory run(const Configuration& initial, const SimParams& params) {
    NullObserver obs;
    return run(initial, params, obs);
}

struct GeneratorAction {
    double principal;
    double remainder;
};

/// Profile of G at every ring site.
inline std::vector<double> ring_profile(const TestFunction& G, std::int64_t n, std::int64_t N) {
    std::vector<double> B(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) B[i] = G.profile(static_cast<double>(site_coordinate(i, N)) / n);
    return B;
}

/**
 * Ring version of K_n applied to the profile of G at every site:
 * KB[i] = sum_{0 < |d| <= L} (B(i+d) - B(i)) p(d).
 */
inline std::vector<double> ring_kn_profile(const TestFunction& G, std::int64_t n, const JumpKernel& kernel,
                                           std::int64_t N) {
    const auto B = ring_profile(G, n, N);
    std::vector<std::int64_t> supp;
    for (std::int64_t i = 0; i < N; ++i)
        if (B[i] != 0.0) supp.push_back(i);
    const std::int64_t L = kernel.truncation();
    const double mass = kernel.renorm_mass();
    std::vector<double> KB(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::int64_t j : supp) {
            if (j == i) continue;
            std::int64_t d = ring_displacement(N, i, j);
            if (std::llabs(d) <= L) acc += B[j] * kernel.p(d);
        }
        KB[i] = acc - B[i] * mass;
    }
    return KB;
}

namespace detail {

// Geometry of one test function on the ring.
struct DynkinGeometry {
    std::int64_t N;
    std::vector<double> B;       // profile at each site
    std::vector<double> dB;      // B(i+1) - B(i)
    std::vector<double> KB;      // ring K_n of the profile
    std::vector<std::int64_t> S; // sites with dB != 0

    DynkinGeometry(const TestFunction& G, std::int64_t n, const JumpKernel& kernel, std::int64_t N_)
        : N(N_), B(ring_profile(G, n, N_)) {
        dB.resize(static_cast<std::size_t>(N));
        for (std::int64_t i = 0; i < N; ++i) {
            dB[i] = B[(i + 1) % N] - B[i];
            if (dB[i] != 0.0) S.push_back(i);
        }
        KB = ring_kn_profile(G, n, kernel, N);
    }
};

inline double principal_sum(const DynkinGeometry& g, const Configuration& eta) {
    double acc = 0.0;
    for (std::int64_t x = 0; x < g.N; ++x)
        if (eta[x] && g.KB[x] != 0.0) acc += g.KB[x] * (eta[x - 1] + eta[x + 1]);
    return acc;
}

// R = sum_{x,y} eta(x) eta(y+1) p(y-x) [dB(x) - dB(y)]
inline double remainder_sum(const DynkinGeometry& g, const Configuration& eta, const JumpKernel& kernel) {
    const std::int64_t N = g.N, L = kernel.truncation();
    double acc = 0.0;
    for (std::int64_t x : g.S) {
        if (!eta[x]) continue;
        for (std::int64_t y = 0; y < N; ++y) {
            std::int64_t d = ring_displacement(N, x, y);
            if (d == 0 || std::llabs(d) > L || !eta[y + 1]) continue;
            acc += kernel.p(d) * g.dB[x];
        }
    }
    for (std::int64_t y : g.S) {
        if (!eta[y + 1]) continue;
        for (std::int64_t x = 0; x < N; ++x) {
            std::int64_t d = ring_displacement(N, x, y);
            if (d == 0 || std::llabs(d) > L || !eta[x]) continue;
            acc -= kernel.p(d) * g.dB[y];
        }
    }
    return acc;
}

} // namespace detail

/**
 * n^gamma L <pi^n, G_s> split as principal (1/2n) sum_x n^gamma K_n G_s(x/n) eta(x)[eta(x-1)+eta(x+1)]
 * plus remainder (n^gamma / 2n) R_n^G(s), with the ring kernel used by the simulator.
 */
inline GeneratorAction generator_action(const Configuration& eta, const TestFunction& G, double s, std::int64_t n,
                                        double gamma) {
    const std::int64_t N = eta.size();
    const JumpKernel kernel = ring_kernel(gamma, N);
    detail::DynkinGeometry g(G, n, kernel, N);
    const double f = std::pow(static_cast<double>(n), gamma) / (2.0 * n) * G.tau(s);
    return {f * detail::principal_sum(g, eta), f * detail::remainder_sum(g, eta, kernel)};
}

/// n^gamma L <pi^n, G_s> by direct summation over exchange rates.
inline double generator_action_direct(const Configuration& eta, const TestFunction& G, double s, std::int64_t n,
                                      double gamma) {
    const std::int64_t N = eta.size();
    const JumpKernel kernel = ring_kernel(gamma, N);
    const auto B = ring_profile(G, n, N);
    double acc = 0.0;
    for (std::int64_t x = 0; x < N; ++x)
        for (std::int64_t y = x + 1; y < N; ++y) {
            if (eta[x] == eta[y] || B[x] == B[y]) continue;
            double r = rate_c(eta, x, y, kernel);
            // F(eta^{x,y}) - F(eta) = (B(x) - B(y)) (eta(y) - eta(x)) / n
            acc += r * (B[x] - B[y]) * (eta[y] - eta[x]);
        }
    return std::pow(static_cast<double>(n), gamma) / n * G.tau(s) * acc;
}

/**
 * Observer accumulating M_t(G) exactly along a trajectory. The compensator is
 * integrated piecewise between events, with n^gamma L <pi, G> maintained from
 * the principal and remainder sums; the convolution terms of the remainder are
 * kept up to date on the sites where dB != 0.
 */
class DynkinTracker {
public:
    DynkinTracker(const std::vector<TestFunction>& Gs, const Configuration& initial, std::int64_t n, double gamma)
        : n_(n), eta_(initial), kernel_(ring_kernel(gamma, initial.size())),
          scale_(std::pow(static_cast<double>(n), gamma) / (2.0 * n)) {
        for (const auto& G : Gs) {
            State st{G, detail::DynkinGeometry(G, n, kernel_, initial.size())};
            init(st);
            states_.push_back(std::move(st));
        }
    }

    void interval(double t0, double t1, const Configuration&) {
        for (auto& st : states_) st.M -= st.G.tau_integral(t0, t1) * scale_ * (st.P + st.R);
    }

    void event(double t, std::int64_t x, std::int64_t y, const Configuration&) {
        // x was occupied and y empty before the exchange
        std::vector<std::int64_t> touched;
        for (std::int64_t s : {x - 1, x, x + 1, y - 1, y, y + 1}) {
            s = eta_.wrap(s);
            if (std::find(touched.begin(), touched.end(), s) == touched.end()) touched.push_back(s);
        }
        for (auto& st : states_) {
            st.M += st.G.tau(t) * (st.geo.B[y] - st.geo.B[x]) / static_cast<double>(n_);
            st.P -= local_principal(st, touched);
        }
        eta_.swap_sites(x, y);
        for (auto& st : states_) {
            st.P += local_principal(st, touched);
            update(st, x, y);
        }
    }

    void record(std::size_t, double) {
        for (auto& st : states_) st.recorded.push_back(st.M);
    }

    std::vector<DynkinRecord> records() const {
        std::vector<DynkinRecord> out;
        for (const auto& st : states_) out.push_back({st.G, st.recorded});
        return out;
    }

    /// current n^gamma L <pi, G_s> for test function k
    double action(std::size_t k, double s) const {
        return states_[k].G.tau(s) * scale_ * (states_[k].P + states_[k].R);
    }

private:
    struct State {
        TestFunction G;
        detail::DynkinGeometry geo;
        std::vector<double> C1; // C1[k] = sum_z eta(z) p(z-1-x), x = S[k]
        std::vector<double> C2; // C2[k] = sum_z eta(z) p(y-z),   y = S[k]
        double P = 0.0, R = 0.0, M = 0.0;
        std::vector<double> recorded;
    };

    double pr(std::int64_t d) const {
        d = ring_displacement(eta_.size(), 0, d);
        if (d == 0 || std::llabs(d) > kernel_.truncation()) return 0.0;
        return kernel_.p(d);
    }

    void init(State& st) {
        const auto& S = st.geo.S;
        st.C1.assign(S.size(), 0.0);
        st.C2.assign(S.size(), 0.0);
        for (std::size_t k = 0; k < S.size(); ++k) {
            double a = 0.0, b = 0.0;
            for (std::int64_t z = 0; z < eta_.size(); ++z) {
                if (!eta_[z]) continue;
                a += pr(z - 1 - S[k]);
                b += pr(S[k] - z);
            }
            st.C1[k] = a;
            st.C2[k] = b;
        }
        st.P = detail::principal_sum(st.geo, eta_);
        st.R = remainder_from_conv(st);
    }

    double remainder_from_conv(const State& st) const {
        const auto& S = st.geo.S;
        double acc = 0.0;
        for (std::size_t k = 0; k < S.size(); ++k) {
            std::int64_t s = S[k];
            double d = st.geo.dB[s];
            if (eta_[s]) acc += d * st.C1[k];
            if (eta_[s + 1]) acc -= d * st.C2[k];
        }
        return acc;
    }

    void update(State& st, std::int64_t x, std::int64_t y) {
        const auto& S = st.geo.S;
        for (std::size_t k = 0; k < S.size(); ++k) {
            st.C1[k] += pr(y - 1 - S[k]) - pr(x - 1 - S[k]);
            st.C2[k] += pr(S[k] - y) - pr(S[k] - x);
        }
        st.R = remainder_from_conv(st);
    }

    double local_principal(const State& st, const std::vector<std::int64_t>& sites) const {
        double acc = 0.0;
        for (std::int64_t i : sites)
            if (eta_[i]) acc += st.geo.KB[i] * (eta_[i - 1] + eta_[i + 1]);
        return acc;
    }

    std::int64_t n_;
    Configuration eta_;
    JumpKernel kernel_;
    double scale_;
    std::vector<State> states_;
};

/**
 * Runs in diagnostic mode: the returned trajectory carries M_t(G) for each G
 * at every record time, with exact piecewise integration of the compensator.
 */
inline Trajectory run_diagnostic(const Configuration& initial, const SimParams& params,
                                 const std::vector<TestFunction>& Gs) {
    DynkinTracker tracker(Gs, initial, params.n, params.gamma);
    Trajectory traj = run(initial, params, tracker);
    traj.dynkin = tracker.records();
    return traj;
}

inline bool same_function(const TestFunction& a, const TestFunction& b) {
    return a.kind == b.kind && a.center == b.center && a.width == b.width && a.time_coeffs == b.time_coeffs;
}

/// (1/n) sum_x B(x/n) eta(x) for the spatial profile B of G
inline double profile_pairing(const Configuration& eta, const TestFunction& G, std::int64_t n) {
    const std::int64_t N = eta.size();
    double acc = 0.0;
    for (std::int64_t i = 0; i < N; ++i)
        if (eta[i]) acc += G.profile(static_cast<double>(site_coordinate(i, N)) / n);
    return acc / n;
}

/// <pi^n, G_s>
inline double pairing(const Configuration& eta, const TestFunction& G, double s, std::int64_t n) {
    return G.tau(s) * profile_pairing(eta, G, n);
}

/**
 * M_t(G). Exact if the trajectory was run in diagnostic mode for G; otherwise
 * the time integrals use the trapezoid rule on the snapshot grid, whose error is
 * O(dt^2) in the grid spacing dt.
 */
inline double dynkin_residual(const Trajectory& traj, const TestFunction& G, double t) {
    const auto& snaps = traj.snapshots;
    std::size_t idx = snaps.size();
    for (std::size_t k = 0; k < snaps.size(); ++k)
        if (std::abs(snaps[k].first - t) <= 1e-12 * std::max(1.0, std::abs(t))) idx = k;
    if (idx == snaps.size()) throw std::domain_error("dynkin_residual: t is not on the record grid");
    for (const auto& r : traj.dynkin)
        if (same_function(r.G, G)) return r.values.at(idx);

    const std::int64_t n = traj.params.n;
    const double gamma = traj.params.gamma;
    auto integrand = [&](std::size_t k) {
        const auto& [s, eta] = snaps[k];
        GeneratorAction a = generator_action(eta, G, s, n, gamma);
        return G.dtau(s) * profile_pairing(eta, G, n) + a.principal + a.remainder;
    };
    double integral = 0.0;
    double prev = integrand(0);
    for (std::size_t k = 1; k <= idx; ++k) {
        double cur = integrand(k);
        integral += 0.5 * (snaps[k].first - snaps[k - 1].first) * (prev + cur);
        prev = cur;
    }
    return pairing(snaps[idx].second, G, t, n) - pairing(snaps[0].second, G, snaps[0].first, n) - integral;
}

} // namespace fpme

#endif
