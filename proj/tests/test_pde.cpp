#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <fpme/pde.hpp>
#include <fpme/simulator.hpp>

using namespace fpme;

namespace {

PdeParams base(double gamma, int m, std::int64_t n_pde, double T) {
    PdeParams p;
    p.gamma = gamma;
    p.m = m;
    p.b = 0.5;
    p.W = 8.0;
    p.n_pde = n_pde;
    p.T = T;
    p.record_times = {0.0, T};
    return p;
}

double cauchy_l1(std::int64_t n_pde) {
    const auto B = TestFunction::make_bump(1.0);
    const double A = 0.4 * std::exp(1.0);
    auto p = base(1.0, 1, n_pde, 0.25);
    auto sol = integrate([&](double u) { return 0.5 + A * B.profile(u); }, p);
    const auto& f = sol.at(0.25);
    double l1 = 0.0;
    for (std::int64_t i = 0; i < p.cells(); ++i)
        l1 += std::abs(f.values[i] - cauchy_reference(B, A, 0.5, 0.25, f.u(i))) * p.h();
    return l1;
}

} // namespace

TEST(PdeParams, Validation) {
    auto p = base(1.0, 2, 64, 1.0);
    EXPECT_NO_THROW(p.validate());
    p.b = 1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = base(1.0, 0, 64, 1.0);
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = base(1.0, 2, 64, 1.0);
    p.W = 8.01;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = base(1.0, 2, 64, 1.0);
    p.record_times = {0.0, 2.0};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = base(1.0, 2, 64, 1.0);
    p.cfl = 1.5;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    EXPECT_THROW(FractionalPME(base(2.0, 2, 64, 1.0)), std::domain_error);
    FractionalPME s(base(1.0, 2, 16, 1.0));
    EXPECT_THROW(s.initial([](double) { return 1.5; }), std::invalid_argument);
}

// FFT convolution against the O(M^2) sum over window cells
TEST(FractionalPME, RhsMatchesDirectConvolution) {
    Rng rng(4);
    for (double g : {0.5, 1.0, 1.5})
        for (int m : {1, 2, 3}) {
            auto p = base(g, m, 16, 1.0);
            p.W = 4.0;
            FractionalPME s(p);
            const std::int64_t M = p.cells();
            std::vector<double> rho(static_cast<std::size_t>(M));
            for (auto& v : rho) v = rng.uniform();
            auto fast = s.rhs(rho);
            JumpKernel k(g, 1);
            const double bm = std::pow(0.5, m), scale = std::pow(16.0, g);
            for (std::int64_t i = 0; i < M; ++i) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < M; ++j)
                    if (j != i) acc += (std::pow(rho[j], m) - bm) * k.p(j - i);
                acc -= std::pow(rho[i], m) - bm;
                EXPECT_NEAR(fast[i], scale * acc, 1e-12 * scale) << "gamma " << g << " m " << m << " i " << i;
            }
        }
}

// circular convolution over the minimal image, jumps 0 < |d| <= (M-1)/2
TEST(FractionalPME, RingRhsMatchesDirectCircularSum) {
    Rng rng(5);
    for (double g : {0.5, 1.5})
        for (std::int64_t n_pde : {16, 15}) {
            auto p = base(g, 2, n_pde, 1.0);
            p.W = n_pde == 15 ? 5.0 : 4.0;
            p.geometry = Geometry::ring;
            FractionalPME s(p);
            const std::int64_t M = p.cells();
            std::vector<double> rho(static_cast<std::size_t>(M));
            for (auto& v : rho) v = rng.uniform();
            auto fast = s.rhs(rho);
            JumpKernel k(g, 1);
            const double scale = std::pow(static_cast<double>(n_pde), g);
            for (std::int64_t i = 0; i < M; ++i) {
                double acc = 0.0;
                for (std::int64_t d = 1; 2 * d < M; ++d)
                    for (std::int64_t j : {(i + d) % M, (i - d + M) % M})
                        acc += (rho[j] * rho[j] - rho[i] * rho[i]) * k.p(d);
                EXPECT_NEAR(fast[i], scale * acc, 1e-12 * scale) << "gamma " << g << " M " << M << " i " << i;
            }
        }
}

TEST(FractionalPME, RingConservesMassExactly) {
    const auto B = TestFunction::make_bump(1.5);
    for (double g : {0.5, 1.0, 1.5}) {
        auto p = base(g, 2, 64, 0.5);
        p.W = 4.0;
        p.geometry = Geometry::ring;
        auto sol = integrate([&](double u) { return 0.5 + std::exp(1.0) * 0.4 * B.profile(u); }, p);
        EXPECT_NEAR(sol.at(0.5).excess_mass(), sol.at(0.0).excess_mass(), 1e-12) << "gamma " << g;
        EXPECT_EQ(sol.at(0.5).exterior_mass, 0.0);
        // the data spread over the whole ring, unlike on the line where mass leaves
        EXPECT_GT(sol.at(0.5).values.front(), 0.5);
    }
}

// the two geometries differ by the jumps beyond W/2, which shrink like W^{-gamma}
TEST(FractionalPME, RingApproachesLineAsWindowGrows) {
    const auto B = TestFunction::make_bump(1.0);
    const auto G = TestFunction::make_shifted(-0.5, 0.5);
    auto pairing_gap = [&](double W) {
        double v[2];
        for (int k = 0; k < 2; ++k) {
            auto p = base(1.0, 2, 64, 0.1);
            p.W = W;
            p.geometry = k == 0 ? Geometry::line : Geometry::ring;
            auto sol = integrate([&](double u) { return 0.5 + 0.3 * std::exp(1.0) * B.profile(u); }, p);
            const auto& f = sol.at(0.1);
            double acc = 0.0;
            for (std::int64_t i = 0; i < p.cells(); ++i) acc += f.values[i] * G.profile(f.u(i));
            v[k] = acc * p.h();
        }
        return std::abs(v[1] - v[0]);
    };
    double g8 = pairing_gap(8.0), g32 = pairing_gap(32.0);
    EXPECT_GT(g8, 0.0);
    EXPECT_LT(g32, 0.35 * g8);
}

TEST(FractionalPME, ConstantStateIsStationary) {
    for (double g : {0.5, 1.5}) {
        auto p = base(g, 2, 32, 0.2);
        auto sol = integrate([](double) { return 0.5; }, p);
        for (double v : sol.at(0.2).values) EXPECT_NEAR(v, 0.5, 1e-14);
        EXPECT_NEAR(sol.at(0.2).exterior_mass, 0.0, 1e-14);
    }
}

TEST(FractionalPME, MassConservedIncludingExterior) {
    const auto B = TestFunction::make_bump(1.5);
    for (double g : {0.5, 1.0, 1.5})
        for (int m : {1, 2}) {
            auto p = base(g, m, 64, 0.5);
            p.W = 4.0;
            auto sol = integrate([&](double u) { return 0.5 + std::exp(1.0) * 0.4 * B.profile(u); }, p);
            const auto& a = sol.at(0.0);
            const auto& z = sol.at(0.5);
            double before = a.excess_mass(), after = z.excess_mass() + z.exterior_mass;
            EXPECT_NEAR(after, before, 1e-12) << "gamma " << g << " m " << m;
            EXPECT_GT(z.exterior_mass, 0.0);
        }
}

TEST(FractionalPME, ComparisonPrinciple) {
    const auto B1 = TestFunction::make_bump(1.0), B2 = TestFunction::make_shifted(0.4, 0.8);
    const double e = std::exp(1.0);
    for (double g : {0.5, 1.0, 1.5})
        for (int m : {1, 2}) {
            auto p = base(g, m, 128, 0.3);
            p.record_times = uniform_grid(0.3, 6);
            auto lo = integrate([&](double u) { return 0.5 + 0.3 * e * B1.profile(u); }, p);
            auto hi = integrate([&](double u) { return 0.5 + 0.3 * e * B1.profile(u) + 0.15 * e * B2.profile(u); }, p);
            for (std::size_t k = 0; k < lo.frames.size(); ++k)
                for (std::size_t i = 0; i < lo.frames[k].values.size(); ++i)
                    ASSERT_LE(lo.frames[k].values[i], hi.frames[k].values[i] + 1e-8)
                        << "gamma " << g << " m " << m << " frame " << k << " cell " << i;
        }
}

TEST(FractionalPME, MaximumPrinciple) {
    const auto B = TestFunction::make_bump(1.0);
    auto p = base(1.0, 2, 128, 0.5);
    p.record_times = uniform_grid(0.5, 5);
    auto sol = integrate([&](double u) { return 0.5 + 0.4 * std::exp(1.0) * B.profile(u); }, p);
    double prev = 1.0;
    for (const auto& f : sol.frames) {
        double mx = *std::max_element(f.values.begin(), f.values.end());
        double mn = *std::min_element(f.values.begin(), f.values.end());
        EXPECT_LE(mx, prev + 1e-12);
        EXPECT_GE(mn, 0.5 - 1e-9);
        prev = mx;
    }
}

// linear gamma = 1 case against the Cauchy kernel at s = pi c_1 t
TEST(FractionalPME, CauchyOracleConverges) {
    double coarse = cauchy_l1(256), fine = cauchy_l1(1024);
    EXPECT_LT(fine, coarse);
    EXPECT_LE(fine, 5e-3);
}

TEST(CauchyReference, LimitsAndMass) {
    const auto B = TestFunction::make_bump(1.0);
    EXPECT_DOUBLE_EQ(cauchy_reference(B, 2.0, 0.5, 0.0, 0.3), 0.5 + 2.0 * B.profile(0.3));
    // the Poisson kernel conserves the integral of the bump
    double mass0 = 0.0, mass1 = 0.0;
    const double h = 0.01;
    for (double u = -1.0; u < 1.0; u += h) mass0 += B.profile(u) * h;
    for (double u = -400.0; u < 400.0; u += h) mass1 += (cauchy_reference(B, 1.0, 0.0, 0.1, u)) * h;
    EXPECT_NEAR(mass1, mass0, 2e-3 * mass0);
}

TEST(TimeIntegral, ExactCases) {
    // Simpson is exact on cubics
    std::vector<double> t, v;
    for (int i = 0; i <= 4; ++i) {
        t.push_back(0.25 * i);
        v.push_back(t.back() * t.back() * t.back() - t.back());
    }
    EXPECT_NEAR(time_integral(t, v), 0.25 - 0.5, 1e-15);
    // trapezoid is exact on lines, also on a ragged grid
    t = {0.0, 0.1, 0.35, 1.0};
    v.clear();
    for (double s : t) v.push_back(3.0 * s + 1.0);
    EXPECT_NEAR(time_integral(t, v), 2.5, 1e-15);
    EXPECT_EQ(time_integral({0.0}, {1.0}), 0.0);
}

namespace {

struct WeakRun {
    PdeSolution sol;
    WeakResidual F;
};

WeakRun weak_run(double gamma, std::int64_t n_pde) {
    const auto B = TestFunction::make_bump(1.0);
    const auto G = TestFunction::make_polynomial(0.2, 0.7, {1.0, -1.0});
    auto p = base(gamma, 2, n_pde, 0.2);
    p.record_times = uniform_grid(0.2, 40);
    auto g0 = [&](double u) { return 0.5 + 0.3 * std::exp(1.0) * B.profile(u); };
    WeakRun w{integrate(g0, p), {}};
    w.F = weak_residual(w.sol, G, 0.2, g0);
    return w;
}

} // namespace

TEST(WeakResidual, SmallOnSolutionAndLargeOffIt) {
    const auto B = TestFunction::make_bump(1.0);
    const auto G = TestFunction::make_polynomial(0.2, 0.7, {1.0, -1.0});
    auto g0 = [&](double u) { return 0.5 + 0.3 * std::exp(1.0) * B.profile(u); };
    for (double g : {0.5, 1.0}) {
        auto w = weak_run(g, 256);
        EXPECT_LE(std::abs(w.F.value), 1e-4) << "gamma " << g;
        EXPECT_GT(std::abs(w.F.space_term), 100 * std::abs(w.F.value)) << "gamma " << g;
        EXPECT_THROW(weak_residual(w.sol, G, 0.123, g0), std::domain_error);
        // freezing the data at t = 0 breaks the identity
        auto frozen = w.sol;
        for (auto& f : frozen.frames) f.values = w.sol.frames.front().values;
        EXPECT_GT(std::abs(weak_residual(frozen, G, 0.2, g0).value), 10 * std::abs(w.F.value)) << "gamma " << g;
    }
}

// for gamma > 1 the discrete operator is only O(h^{2-gamma}) consistent
TEST(WeakResidual, ConvergesAtConsistencyOrder) {
    for (double g : {1.0, 1.5}) {
        double a = std::abs(weak_run(g, 256).F.value), b = std::abs(weak_run(g, 1024).F.value);
        double expected = std::pow(4.0, -std::min(1.0, 2.0 - g));
        EXPECT_LE(b / a, 1.1 * expected) << "gamma " << g;
        EXPECT_GE(b / a, 0.9 * expected) << "gamma " << g;
    }
}

TEST(Seminorm, ZeroForConstantAndPositiveOtherwise) {
    auto p = base(1.0, 2, 32, 0.1);
    auto flat = integrate([](double) { return 0.5; }, p);
    EXPECT_EQ(sobolev_seminorm(flat.frames, 1.0).value, 0.0);
    const auto B = TestFunction::make_bump(1.0);
    auto bumpy = integrate([&](double u) { return 0.5 + 0.3 * B.profile(u); }, p);
    auto s = sobolev_seminorm(bumpy.frames, 1.0);
    EXPECT_GT(s.value, 0.0);
    EXPECT_GE(s.diagonal_estimate, 0.0);
    EXPECT_TRUE(std::isfinite(s.value));
}
