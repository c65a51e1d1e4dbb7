#ifndef FPME_PDE_HPP
#define FPME_PDE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fftw3.h>

#include "kernel.hpp"
#include "operators.hpp"
#include "test_function.hpp"

namespace fpme {

/// line: window on the real line with the far field frozen at b.
/// ring: periodic window of length W, jumps truncated at W/2 (the geometry of the particle ring).
enum class Geometry { line, ring };

struct PdeParams {
    double gamma = 1.0;
    int m = 2;
    double b = 0.5;       // far-field value
    double W = 8.0;       // window [-W/2, W/2)
    std::int64_t n_pde = 256;
    double T = 1.0;
    double cfl = 0.5;
    std::vector<double> record_times{0.0, 1.0};
    Geometry geometry = Geometry::line;

    std::int64_t cells() const { return std::llround(W * static_cast<double>(n_pde)); }
    double h() const { return 1.0 / static_cast<double>(n_pde); }

    void validate() const {
        check_gamma(gamma);
        if (m < 1) throw std::invalid_argument("m must be >= 1");
        if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("b must lie in (0,1)");
        if (n_pde < 1 || cells() < 4) throw std::invalid_argument("grid too small");
        if (std::abs(W * n_pde - static_cast<double>(cells())) > 1e-9)
            throw std::invalid_argument("W * n_pde must be an integer");
        if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
        if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl must lie in (0,1]");
        double prev = -1.0;
        for (double t : record_times) {
            if (t < 0.0 || t > T || t < prev) throw std::invalid_argument("record times must be sorted in [0,T]");
            prev = t;
        }
    }
};

/// rho(t, u_i) on u_i = (i - M/2) h, i = 0..M-1; rho = b outside the window (line geometry).
struct DensityField {
    PdeParams params;
    double time = 0.0;
    std::vector<double> values;
    double exterior_mass = 0.0; // integral of (rho - b) carried out of the window so far

    double u(std::int64_t i) const {
        return static_cast<double>(i - params.cells() / 2) * params.h();
    }
    /// integral over the window of (rho - b)
    double excess_mass() const {
        double acc = 0.0;
        for (double v : values) acc += v - params.b;
        return acc * params.h();
    }
};

namespace detail {

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        if (p) fftw_destroy_plan(p);
    }
};
struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

} // namespace detail

/**
 * The discrete operator n^gamma K_n on the window with the exterior frozen at b,
 * applied to f = rho^m - b^m by zero-padded FFT convolution:
 *   (K f)(x) = sum_{y in window} f(y) p(y-x) - f(x).
 * In ring geometry the convolution is circular over jumps 0 < |d| <= (M-1)/2 and
 * the diagonal is the truncated mass of p, so no mass leaves.
 * Not thread-safe (owns FFTW plans and buffers).
 */
class FractionalPME {
public:
    explicit FractionalPME(PdeParams params) : p_(std::move(params)), kernel_(p_.gamma, 1) {
        p_.validate();
        M_ = p_.cells();
        const bool ring = p_.geometry == Geometry::ring;
        L_ = 1;
        while (L_ < 2 * M_) L_ *= 2;
        if (ring) L_ = M_;
        scale_ = std::pow(static_cast<double>(p_.n_pde), p_.gamma);
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * L_)));
        spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (L_ / 2 + 1))));
        forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(L_), real_.get(), spec_.get(), FFTW_ESTIMATE));
        backward_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(L_), spec_.get(), real_.get(), FFTW_ESTIMATE));

        std::fill(real_.get(), real_.get() + L_, 0.0);
        const std::int64_t reach = ring ? (M_ - 1) / 2 : M_ - 1;
        diag_ = ring ? 0.0 : 1.0;
        for (std::int64_t d = 1; d <= reach; ++d) {
            double w = kernel_.p(d);
            real_.get()[d] = w;
            real_.get()[L_ - d] = w;
            if (ring) diag_ += 2.0 * w;
        }
        fftw_execute(forward_.get());
        kspec_.resize(static_cast<std::size_t>(L_ / 2 + 1));
        for (std::int64_t k = 0; k <= L_ / 2; ++k) kspec_[k] = {spec_.get()[k][0], spec_.get()[k][1]};

        // mass of p leaving the window from cell i: sum over exterior y of p(y - i)
        exit_.assign(static_cast<std::size_t>(M_), 0.0);
        if (!ring)
            for (std::int64_t i = 0; i < M_; ++i)
                exit_[i] = 0.5 * (kernel_.tail_mass(i) + kernel_.tail_mass(M_ - 1 - i));
    }

    const PdeParams& params() const { return p_; }
    const JumpKernel& kernel() const { return kernel_; }
    double scale() const { return scale_; }

    /// n^gamma K_n (rho^m - b^m) on the window.
    std::vector<double> rhs(const std::vector<double>& rho) {
        std::vector<double> f = excess_power(rho);
        std::vector<double> out = convolve(f);
        for (std::int64_t i = 0; i < M_; ++i) out[i] = scale_ * (out[i] - diag_ * f[i]);
        return out;
    }

    /// Rate at which the excess mass leaves the window: h n^gamma sum_i f_i exit_i.
    double outflow(const std::vector<double>& rho) const {
        std::vector<double> f = excess_power(rho);
        double acc = 0.0;
        for (std::int64_t i = 0; i < M_; ++i) acc += f[i] * exit_[i];
        return acc * scale_ * p_.h();
    }

    double stable_dt(const std::vector<double>& rho) const {
        double rmax = 0.0;
        for (double v : rho) rmax = std::max(rmax, std::abs(v));
        double lip = p_.m * (p_.m == 1 ? 1.0 : std::pow(rmax, p_.m - 1));
        // the operator conv - I has norm at most 2 (p sums to 1)
        return p_.cfl * std::pow(p_.h(), p_.gamma) / (std::max(lip, 1e-12) * 2.0);
    }

    DensityField initial(const std::function<double(double)>& g) const {
        DensityField f;
        f.params = p_;
        f.values.resize(static_cast<std::size_t>(M_));
        for (std::int64_t i = 0; i < M_; ++i) f.values[i] = g(f.u(i));
        for (double v : f.values)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("initial profile must take values in [0,1]");
        return f;
    }

    /// One SSP-RK2 (Heun) step of size dt, with exterior mass bookkeeping.
    void step(DensityField& f, double dt) {
        auto k1 = rhs(f.values);
        double o1 = outflow(f.values);
        std::vector<double> mid(f.values.size());
        for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = f.values[i] + dt * k1[i];
        auto k2 = rhs(mid);
        double o2 = outflow(mid);
        for (std::size_t i = 0; i < mid.size(); ++i) f.values[i] = 0.5 * (f.values[i] + mid[i] + dt * k2[i]);
        f.exterior_mass += 0.5 * dt * (o1 + o2);
        f.time += dt;
        check_range(f);
    }

private:
    std::vector<double> excess_power(const std::vector<double>& rho) const {
        const double bm = std::pow(p_.b, p_.m);
        std::vector<double> f(rho.size());
        for (std::size_t i = 0; i < rho.size(); ++i) f[i] = std::pow(rho[i], p_.m) - bm;
        return f;
    }

    std::vector<double> convolve(const std::vector<double>& f) {
        double* r = real_.get();
        std::copy(f.begin(), f.end(), r);
        std::fill(r + M_, r + L_, 0.0);
        fftw_execute(forward_.get());
        fftw_complex* s = spec_.get();
        for (std::int64_t k = 0; k <= L_ / 2; ++k) {
            double a = s[k][0], bb = s[k][1];
            double c = kspec_[k][0], d = kspec_[k][1];
            s[k][0] = a * c - bb * d;
            s[k][1] = a * d + bb * c;
        }
        fftw_execute(backward_.get());
        std::vector<double> out(r, r + M_);
        for (double& v : out) v /= static_cast<double>(L_);
        return out;
    }

    static void check_range(const DensityField& f) {
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            double v = f.values[i];
            if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
                std::ostringstream os;
                os << "density left [0,1] at t=" << f.time << ", u=" << f.u(static_cast<std::int64_t>(i))
                   << ", value=" << v << "; reduce cfl";
                throw numerical_error(os.str());
            }
        }
    }

    PdeParams p_;
    JumpKernel kernel_;
    std::int64_t M_ = 0, L_ = 0;
    double scale_ = 1.0, diag_ = 1.0;
    std::unique_ptr<double, detail::FftwFree> real_;
    std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
    std::unique_ptr<fftw_plan_s, detail::FftwPlanDeleter> forward_, backward_;
    std::vector<std::array<double, 2>> kspec_;
    std::vector<double> exit_;
};

struct PdeSolution {
    PdeParams params;
    std::vector<DensityField> frames; // one per record time
    std::int64_t steps = 0;

    const DensityField& at(double t) const {
        for (const auto& f : frames)
            if (std::abs(f.time - t) <= 1e-12 * std::max(1.0, t)) return f;
        throw std::domain_error("time is not a recorded frame");
    }
};

/**
 * Integrates from rho(0) = g up to T, landing exactly on every record time.
 * g - b should vanish near the window edges.
 */
inline PdeSolution integrate(const std::function<double(double)>& g, const PdeParams& params) {
    FractionalPME solver(params);
    PdeSolution sol;
    sol.params = solver.params();
    DensityField f = solver.initial(g);
    for (double t_rec : params.record_times) {
        while (f.time < t_rec - 1e-14) {
            double dt = std::min(solver.stable_dt(f.values), t_rec - f.time);
            solver.step(f, dt);
            ++sol.steps;
        }
        f.time = t_rec;
        sol.frames.push_back(f);
    }
    return sol;
}

/// Composite trapezoid on the frames, or Simpson when the frames are uniform with an even count of intervals.
inline double time_integral(const std::vector<double>& t, const std::vector<double>& v) {
    std::size_t k = t.size();
    if (k < 2) return 0.0;
    bool uniform = true;
    double dt = t[1] - t[0];
    for (std::size_t i = 1; i < k; ++i) uniform = uniform && std::abs(t[i] - t[i - 1] - dt) <= 1e-12 * std::max(1.0, dt);
    if (uniform && (k - 1) % 2 == 0) {
        double acc = v[0] + v[k - 1];
        for (std::size_t i = 1; i + 1 < k; ++i) acc += (i % 2 ? 4.0 : 2.0) * v[i];
        return acc * dt / 3.0;
    }
    double acc = 0.0;
    for (std::size_t i = 1; i < k; ++i) acc += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
    return acc;
}

struct WeakResidual {
    double value = 0.0;
    // F = endpoint - initial - time_term - space_term
    double endpoint = 0.0;   // <rho_t, G_t>
    double initial = 0.0;    // <g, G_0>
    double time_term = 0.0;  // int_0^t <rho_s, d_s G_s> ds
    double space_term = 0.0; // int_0^t <rho_s^m, [-(-Delta)^{gamma/2} G_s]> ds
};

/// frac_lap of the spatial profile of G at every grid point of the window.
inline std::vector<double> frac_lap_on_grid(const TestFunction& G, const PdeParams& p) {
    std::vector<double> out(static_cast<std::size_t>(p.cells()));
    for (std::int64_t i = 0; i < p.cells(); ++i)
        out[i] = frac_lap_profile(G, static_cast<double>(i - p.cells() / 2) * p.h(), p.gamma);
    return out;
}

/**
 * F(t, rho, G, g). Inner products are Riemann sums on the grid (the bump
 * integrands are smooth, so this is spectrally accurate); rho^m pairs with the
 * fractional Laplacian through rho^m - b^m, which vanishes off the window,
 * using that the fractional Laplacian of G integrates to 0. Time integrals use
 * the recorded frames up to t.
 */
inline WeakResidual weak_residual(const PdeSolution& sol, const TestFunction& G, double t,
                                  const std::function<double(double)>& g, const std::vector<double>& lap_grid) {
    const auto& p = sol.params;
    const double h = p.h();
    const double bm = std::pow(p.b, p.m);
    auto profile_pair = [&](const std::vector<double>& vals) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < p.cells(); ++i) acc += vals[i] * G.profile(static_cast<double>(i - p.cells() / 2) * h);
        return acc * h;
    };
    auto lap_pair = [&](const std::vector<double>& vals) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < p.cells(); ++i) acc += (std::pow(vals[i], p.m) - bm) * lap_grid[i];
        return acc * h;
    };

    std::vector<double> ts, a, c;
    bool reached = false;
    for (const auto& f : sol.frames) {
        if (f.time > t + 1e-12 * std::max(1.0, t)) break;
        ts.push_back(f.time);
        double pr = profile_pair(f.values);
        a.push_back(G.dtau(f.time) * pr);
        c.push_back(G.tau(f.time) * lap_pair(f.values));
        if (std::abs(f.time - t) <= 1e-12 * std::max(1.0, t)) reached = true;
    }
    if (!reached) throw std::domain_error("weak_residual: t is not a recorded frame");
    if (sol.frames.front().time != 0.0) throw std::domain_error("weak_residual: first frame must be t = 0");

    std::vector<double> g0(static_cast<std::size_t>(p.cells()));
    for (std::int64_t i = 0; i < p.cells(); ++i) g0[i] = g(static_cast<double>(i - p.cells() / 2) * h);

    WeakResidual r;
    r.endpoint = G.tau(t) * profile_pair(sol.at(t).values);
    r.initial = G.tau(0.0) * profile_pair(g0);
    r.time_term = time_integral(ts, a);
    r.space_term = time_integral(ts, c);
    r.value = r.endpoint - r.initial - r.time_term - r.space_term;
    return r;
}

inline WeakResidual weak_residual(const PdeSolution& sol, const TestFunction& G, double t,
                                  const std::function<double(double)>& g) {
    return weak_residual(sol, G, t, g, frac_lap_on_grid(G, sol.params));
}

struct SeminormResult {
    double value = 0.0;         // int_0^T of the discrete seminorm of rho^m - b^m
    double diagonal_estimate = 0.0; // estimated |u - v| < h contribution (not included in value)
};

/**
 * Discrete int int [f(u) - f(v)]^2 |u - v|^{-1-gamma} du dv for f = rho^m - b^m,
 * off-diagonal cells summed, f = 0 outside the window integrated in closed form.
 */
inline SeminormResult sobolev_seminorm(const std::vector<DensityField>& frames, double gamma) {
    SeminormResult out;
    if (frames.empty()) return out;
    std::vector<double> ts, vals, diags;
    for (const auto& fr : frames) {
        const auto& p = fr.params;
        const std::int64_t M = p.cells();
        const double h = p.h();
        const double bm = std::pow(p.b, p.m);
        std::vector<double> f(static_cast<std::size_t>(M));
        for (std::int64_t i = 0; i < M; ++i) f[i] = std::pow(fr.values[i], p.m) - bm;
        std::vector<double> w(static_cast<std::size_t>(M));
        for (std::int64_t d = 1; d < M; ++d) w[d] = std::pow(d * h, -1.0 - gamma);
        double acc = 0.0;
        for (std::int64_t i = 0; i < M; ++i)
            for (std::int64_t j = i + 1; j < M; ++j) {
                double df = f[i] - f[j];
                if (df != 0.0) acc += 2.0 * df * df * w[j - i];
            }
        acc *= h * h;
        // f(v) = 0 for v outside [u_0 - h/2, u_{M-1} + h/2]
        double lo = fr.u(0) - 0.5 * h, hi = fr.u(M - 1) + 0.5 * h;
        for (std::int64_t i = 0; i < M; ++i) {
            double u = fr.u(i);
            acc += 2.0 * f[i] * f[i] * h * (std::pow(u - lo, -gamma) + std::pow(hi - u, -gamma)) / gamma;
        }
        double diag = 0.0;
        for (std::int64_t i = 1; i + 1 < M; ++i) {
            double slope = (f[i + 1] - f[i - 1]) / (2.0 * h);
            diag += slope * slope * 2.0 * std::pow(h, 2.0 - gamma) / (2.0 - gamma);
        }
        diag *= h;
        ts.push_back(fr.time);
        vals.push_back(acc);
        diags.push_back(diag);
    }
    if (ts.size() == 1) {
        out.value = vals[0];
        out.diagonal_estimate = diags[0];
        return out;
    }
    out.value = time_integral(ts, vals);
    out.diagonal_estimate = time_integral(ts, diags);
    return out;
}

/**
 * Linear case gamma = 1, m = 1: rho(t) = b + P_{s} * (g - b) with the Cauchy
 * kernel P_s(u) = s / (pi (s^2 + u^2)). The operator here is c_1 times the
 * principal-value integral, which equals pi c_1 times the standard
 * (-Delta)^{1/2}, so s = pi c_1 t.
 */
inline double cauchy_reference(const TestFunction& bump, double amplitude, double b, double t, double u) {
    const double s = std::numbers::pi * normalizer(1.0) * t;
    if (s == 0.0) return b + amplitude * bump.profile(u);
    auto integrand = [&](double v) {
        return bump.profile(v) * s / (std::numbers::pi * (s * s + (u - v) * (u - v)));
    };
    double lo = bump.center - bump.width, hi = bump.center + bump.width;
    double err = 0.0;
    double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-13, &err);
    return b + amplitude * val;
}

} // namespace fpme

#endif
