#ifndef FPME_OPERATORS_HPP
#define FPME_OPERATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kernel.hpp"
#include "test_function.hpp"

namespace fpme {

/// Error raised when a quadrature returns a non-finite value.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// w[d] = c d^{-1-gamma}, w[0] = 0
inline std::vector<double> kernel_weights(double gamma, std::int64_t dmax) {
    double c = normalizer(gamma);
    std::vector<double> w(static_cast<std::size_t>(dmax) + 1, 0.0);
    for (std::int64_t d = 1; d <= dmax; ++d) w[d] = c * std::pow(static_cast<double>(d), -gamma - 1.0);
    return w;
}

// lattice sites y with |y/n| <= b
inline std::int64_t support_lo(double b, std::int64_t n) { return static_cast<std::int64_t>(std::floor(-b * n)); }
inline std::int64_t support_hi(double b, std::int64_t n) { return static_cast<std::int64_t>(std::ceil(b * n)); }

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-11) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &err);
}

// integral over [a, b], 0 < a < b, in the variable t = log w
template <class F>
double integrate_log(F&& f, double a, double b, double tol = 1e-11) {
    if (!(b > a)) return 0.0;
    auto g = [&](double t) {
        double w = std::exp(t);
        return f(w) * w;
    };
    return integrate(g, std::log(a), std::log(b), tol);
}

} // namespace detail

struct KnValue {
    double value;
    double truncation_bound; // bound on the error coming from the analytic far tail
};

/**
 * K_n G_s(x/n) = sum_y [G_s(y/n) - G_s(x/n)] p(y-x).
 * Sites outside the support of G contribute (far - G_s(x/n)) p(y-x); those are
 * summed in closed form through sum_{y != x} p(y-x) = 1.
 */
template <class Fn>
KnValue kn_apply(const Fn& G, double s, std::int64_t n, std::int64_t x, const JumpKernel& k) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    const double b = G.support_radius();
    const double far = G.far_value();
    const std::int64_t lo = detail::support_lo(b, n), hi = detail::support_hi(b, n);
    const double gx = G.profile(static_cast<double>(x) / n);
    double acc = 0.0;
    for (std::int64_t y = lo; y <= hi; ++y) {
        if (y == x) continue;
        double gy = G.profile(static_cast<double>(y) / n) - far;
        if (gy != 0.0) acc += gy * k.p(y - x);
    }
    const double tau = G.tau(s);
    // the normalisation of c_gamma is accurate to ~1e-14 in relative terms
    return {tau * (acc + far - gx), std::abs(tau * (far - gx)) * 1e-13};
}

/**
 * [-(-Delta)^{gamma/2} G_s](u) from the symmetrised form
 * c int_0^inf [G(u+w) + G(u-w) - 2G(u)] w^{-1-gamma} dw.
 */
inline double frac_lap_profile(const TestFunction& G, double u, double gamma) {
    check_gamma(gamma);
    const double c = normalizer(gamma);
    const double b = G.support_radius();
    const double A = 3.0 * b;
    const double lo = G.center - G.width, hi = G.center + G.width;

    // Taylor part on [0, delta]
    double edge = std::min(std::abs(u - lo), std::abs(u - hi));
    bool inside = u > lo && u < hi;
    double delta = std::min(0.01 * G.width, A);
    if (inside) delta = std::min(delta, 0.25 * edge);
    double inner_taylor = 0.0;
    if (inside) {
        bump::Jet d = G.profile_jet(u);
        double fact = 1.0;
        for (int k = 1; 2 * k <= bump::kOrder; ++k) {
            fact *= (2 * k - 1) * (2 * k);
            inner_taylor += 2.0 * d[2 * k] / fact * std::pow(delta, 2 * k - gamma) / (2 * k - gamma);
        }
    }

    const double gu = G.profile(u);
    auto second_diff = [&](double w) {
        return (G.profile(u + w) + G.profile(u - w) - 2.0 * gu) * std::pow(w, -1.0 - gamma);
    };
    // breakpoints where u +- w crosses the support edges
    std::vector<double> pts{delta, A};
    for (double e : {lo - u, hi - u, u - lo, u - hi})
        if (e > delta && e < A) pts.push_back(e);
    std::sort(pts.begin(), pts.end());
    double inner = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) inner += detail::integrate_log(second_diff, pts[i], pts[i + 1]);

    // outer part: G(u+w) and G(u-w) vanish outside bounded w-intervals
    auto shifted = [&](double w) { return (G.profile(u + w) + G.profile(u - w)) * std::pow(w, -1.0 - gamma); };
    double outer = -2.0 * gu * std::pow(A, -gamma) / gamma;
    std::vector<double> opts{A};
    for (double e : {lo - u, hi - u, u - lo, u - hi})
        if (e > A) opts.push_back(e);
    std::sort(opts.begin(), opts.end());
    for (std::size_t i = 0; i + 1 < opts.size(); ++i) outer += detail::integrate_log(shifted, opts[i], opts[i + 1]);

    double v = c * (inner_taylor + inner + outer);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "frac_lap: non-finite value at u=" << u << " gamma=" << gamma << " (taylor=" << inner_taylor
           << ", inner=" << inner << ", outer=" << outer << ")";
        throw numerical_error(os.str());
    }
    return v;
}

inline double frac_lap(const TestFunction& G, double s, double u, double gamma) {
    return G.tau(s) * frac_lap_profile(G, u, gamma);
}

/// Three-branch envelope H^G(u) dominating |frac_lap(G)(u)|, norms taken over [0,horizon] x R.
inline double frac_lap_envelope(const TestFunction& G, double /*s*/, double u, double gamma) {
    check_gamma(gamma);
    const double c = normalizer(gamma);
    const double b = G.support_radius();
    if (std::abs(u) <= 2.0 * b) return c * G.sup_laplacian() * std::pow(3.0 * b, 2.0 - gamma) / (2.0 - gamma);
    double a = std::abs(u);
    return c * G.sup_abs() * (std::pow(a - b, -gamma) - std::pow(a + b, -gamma)) / gamma;
}

struct GapResult {
    double value;
    double tail_bound; // contribution of |x| > W n, bounded analytically
    double window;     // W
};

/**
 * (1/n) sum_{|x| <= W n} sup_s |n^gamma K_n G_s(x/n) - frac_lap(G_s)(x/n)|.
 * W defaults to 3 b_G. Outside the window both terms are Riemann sum and
 * integral of a smooth compactly supported function; the gap there is
 * bounded with the trapezoid error estimate.
 */
inline GapResult convdisc_gap(const TestFunction& G, std::int64_t n, double gamma, double W = 0.0) {
    if (n < 2) throw std::invalid_argument("convdisc_gap needs n >= 2");
    check_gamma(gamma);
    const double b = G.support_radius();
    if (W <= 0.0) W = 3.0 * b;
    if (W <= b) throw std::invalid_argument("window must exceed the support radius");
    const double stau = G.sup_tau();
    const std::int64_t lo = detail::support_lo(b, n), hi = detail::support_hi(b, n);
    const auto xw = static_cast<std::int64_t>(std::floor(W * n));
    const std::int64_t dmax = std::max(std::abs(xw) + std::abs(lo), xw + hi) + 1;
    const auto w = detail::kernel_weights(gamma, dmax);
    std::vector<double> gy(hi - lo + 1);
    for (std::int64_t y = lo; y <= hi; ++y) gy[y - lo] = G.profile(static_cast<double>(y) / n);

    const double ng = std::pow(static_cast<double>(n), gamma);
    double sum = 0.0;
    for (std::int64_t x = -xw; x <= xw; ++x) {
        double acc = 0.0;
        for (std::int64_t y = lo; y <= hi; ++y) acc += gy[y - lo] * w[std::llabs(y - x)];
        double gx = (x >= lo && x <= hi) ? gy[x - lo] : 0.0;
        double disc = ng * (acc - gx);
        double cont = frac_lap_profile(G, static_cast<double>(x) / n, gamma);
        sum += std::abs(disc - cont);
    }
    const double c = normalizer(gamma);
    const double h = 1.0 / n;
    auto tail_int = [&](double k) { return std::pow(W - b, 1.0 - k) / (k - 1.0); };
    double tail = 2.0 * c * h * h / 12.0 * (2.0 * b + 2.0 * h) *
                  (G.profile_sup(2) * tail_int(1.0 + gamma) + 2.0 * G.profile_sup(1) * (1.0 + gamma) * tail_int(2.0 + gamma) +
                   G.profile_sup(0) * (1.0 + gamma) * (2.0 + gamma) * tail_int(3.0 + gamma));
    return {stau * sum / n, stau * tail, W};
}

/// The rate max{n^{gamma-2}, n^{-1}, n^{gamma-1-delta_gamma}}.
inline double convext_rate(std::int64_t n, double gamma) {
    double nn = static_cast<double>(n);
    return std::max({std::pow(nn, gamma - 2.0), 1.0 / nn, std::pow(nn, gamma - 1.0 - delta_gamma(gamma))});
}

/**
 * (1/n) sum_{x,y} sup_s n^gamma |G_s((x+1)/n) - G_s(x/n) + G_s(y/n) - G_s((y+1)/n)| p(y-x).
 * Pairs with one end outside the support are summed in closed form.
 */
template <class Fn>
double convext_lhs(const Fn& G, std::int64_t n, double gamma) {
    if (n < 2) throw std::invalid_argument("convext needs n >= 2");
    check_gamma(gamma);
    const double b = G.support_radius();
    const double far = G.far_value();
    const std::int64_t lo = detail::support_lo(b, n) - 1, hi = detail::support_hi(b, n);
    const std::int64_t len = hi - lo + 1;
    std::vector<double> dg(len);
    for (std::int64_t x = lo; x <= hi; ++x)
        dg[x - lo] = (G.profile(static_cast<double>(x + 1) / n) - far) - (G.profile(static_cast<double>(x) / n) - far);
    const auto w = detail::kernel_weights(gamma, len);
    double inside = 0.0, outside = 0.0;
    for (std::int64_t i = 0; i < len; ++i) {
        double mass_in = 0.0;
        for (std::int64_t j = 0; j < len; ++j) {
            if (j == i) continue;
            double wij = w[std::llabs(i - j)];
            mass_in += wij;
            inside += std::abs(dg[i] - dg[j]) * wij;
        }
        outside += std::abs(dg[i]) * (1.0 - mass_in);
    }
    double nn = static_cast<double>(n);
    return G.sup_tau() * std::pow(nn, gamma) * (inside + 2.0 * outside) / nn;
}

struct BoundCheck {
    double lhs;
    double rhs;
};

template <class Fn>
BoundCheck convext_bound(const Fn& G, std::int64_t n, double gamma, double C) {
    return {convext_lhs(G, n, gamma), C * convext_rate(n, gamma)};
}

struct CorfracResult {
    double value;      // window sum
    double tail_bound; // bound for |x| > M n
    double taylor_bound; // (2M + 1/n) K / n with K a bound on sup |d/du frac_lap G|
    double window;
};

/// (1/n) sum_x sup_s |frac_lap(G_s)((x-1)/n) - frac_lap(G_s)(x/n)|.
inline CorfracResult corfrac_sum(const TestFunction& G, std::int64_t n, double gamma, double M = 0.0) {
    if (n < 2) throw std::invalid_argument("corfrac_sum needs n >= 2");
    check_gamma(gamma);
    const double b = G.support_radius();
    if (M <= 0.0) M = 3.0 * b;
    if (M <= b + 1.0 / n) throw std::invalid_argument("window must exceed the support radius");
    const auto xm = static_cast<std::int64_t>(std::floor(M * n));
    std::vector<double> f(2 * xm + 2);
    for (std::int64_t x = -xm - 1; x <= xm; ++x) f[x + xm + 1] = frac_lap_profile(G, static_cast<double>(x) / n, gamma);
    double sum = 0.0;
    for (std::int64_t x = -xm; x <= xm; ++x) sum += std::abs(f[x + xm] - f[x + xm + 1]);
    const double stau = G.sup_tau();
    const double c = normalizer(gamma);
    const double nn = static_cast<double>(n);
    const double s0 = G.profile_sup(0);
    auto dtail = [&](double u) { return (1.0 + gamma) * c * s0 * 2.0 * b * std::pow(u - b, -2.0 - gamma); };
    double tail = 2.0 / nn * (dtail(M) / nn + 2.0 * b * c * s0 * std::pow(M - b, -1.0 - gamma));
    // K from the envelope of the derivative profile
    double K = std::max(c * G.profile_sup(3) * std::pow(3.0 * b, 2.0 - gamma) / (2.0 - gamma),
                        c * G.profile_sup(1) * (std::pow(b, -gamma) - std::pow(3.0 * b, -gamma)) / gamma);
    return {stau * sum / nn, stau * tail, stau * (2.0 * M + 1.0 / nn) * K / nn, M};
}

} // namespace fpme

#endif
