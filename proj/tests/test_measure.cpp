#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <fpme/measure.hpp>

using namespace fpme;

namespace {

Configuration random_config(std::int64_t N, double b, std::uint64_t seed) {
    Rng rng(seed);
    return sample_configuration(ProductMeasure::constant(N, b), rng);
}

// the four level integrands from box_average alone
std::array<double, 4> levels_direct(const Configuration& eta, const TestFunction& Phi, double s, std::int64_t n,
                                    std::int64_t l, std::int64_t L) {
    std::array<double, 4> v{};
    const std::int64_t N = eta.size();
    for (std::int64_t x = 0; x < N; ++x) {
        double phi = Phi(s, static_cast<double>(x - N / 2) / n);
        v[0] += phi * eta[x] * eta[x + 1];
        v[1] += phi * box_average(eta, x, l, Side::left) * eta[x + 1];
        v[2] += phi * box_average(eta, x, l, Side::left) * box_average(eta, x + 1, L, Side::right);
        v[3] += phi * box_average(eta, x, L, Side::left) * box_average(eta, x + 1, L, Side::right);
    }
    for (auto& a : v) a /= n;
    return v;
}

} // namespace

TEST(Empirical, MassAndPositions) {
    Configuration eta(10);
    eta.set(0, 1);
    eta.set(7, 1);
    EmpiricalMeasure pi{&eta, 5};
    EXPECT_DOUBLE_EQ(pi.mass(), 0.4);
    EXPECT_DOUBLE_EQ(pi.position(0), -1.0);
    EXPECT_DOUBLE_EQ(pi.position(7), 0.4);
    EXPECT_DOUBLE_EQ(pi.integrate([](double u) { return u; }), (-1.0 + 0.4) / 5.0);
    auto G = TestFunction::make_bump(2.0);
    EXPECT_DOUBLE_EQ(pair_empirical(eta, G, 0.0, 5), pi.integrate([&](double u) { return G.profile(u); }));
}

TEST(Boxes, SlidingWindowMatchesDirectAverages) {
    for (std::int64_t ell : {1, 2, 5, 13}) {
        auto eta = random_config(40, 0.4, static_cast<std::uint64_t>(ell));
        BoxAverages box(eta, ell);
        for (std::int64_t x = 0; x < 40; ++x) {
            EXPECT_DOUBLE_EQ(box.left[x], box_average(eta, x, ell, Side::left));
            EXPECT_DOUBLE_EQ(box.right[x], box_average(eta, x, ell, Side::right));
        }
    }
    Configuration eta(6);
    EXPECT_THROW(BoxAverages(eta, 0), std::domain_error);
    EXPECT_THROW(box_average(eta, 0, 0, Side::left), std::domain_error);
}

TEST(Boxes, BoxAverageExcludesCentre) {
    Configuration eta(10);
    eta.set(5, 1);
    EXPECT_EQ(box_average(eta, 5, 3, Side::left), 0.0);
    EXPECT_EQ(box_average(eta, 5, 3, Side::right), 0.0);
    EXPECT_DOUBLE_EQ(box_average(eta, 6, 2, Side::left), 0.5);
    EXPECT_DOUBLE_EQ(box_average(eta, 3, 2, Side::right), 0.5);
}

TEST(Boxes, BoxSize) {
    EXPECT_EQ(box_size(3.9, "l"), 3);
    EXPECT_EQ(box_size(1.0, "l"), 1);
    EXPECT_THROW(box_size(0.99, "l"), std::invalid_argument);
}

TEST(Entropy, ProductMeasureFormula) {
    EXPECT_NEAR(relative_entropy(ProductMeasure::constant(50, 0.3), 0.3), 0.0, 1e-15);
    ProductMeasure mu{{0.2, 0.7, 0.0, 1.0}};
    const double b = 0.4;
    double ref = 0.2 * std::log(0.2 / b) + 0.8 * std::log(0.8 / 0.6) + 0.7 * std::log(0.7 / b) +
                 0.3 * std::log(0.3 / 0.6) + std::log(1.0 / 0.6) + std::log(1.0 / b);
    EXPECT_NEAR(relative_entropy(mu, b), ref, 1e-14);
    EXPECT_THROW(relative_entropy(mu, 0.0), std::domain_error);
    // each site contributes at most the entropy constant
    EXPECT_LE(relative_entropy(mu, b), 4 * entropy_constant(b));
    EXPECT_DOUBLE_EQ(entropy_constant(0.25), std::log(4.0));
    EXPECT_DOUBLE_EQ(entropy_constant(0.75), std::log(4.0));
}

TEST(Entropy, NonNegativeOnRandomProfiles) {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p(20);
        for (auto& v : p) v = rng.uniform();
        double b = 0.05 + 0.9 * rng.uniform();
        EXPECT_GE(relative_entropy(ProductMeasure{p}, b), 0.0);
    }
}

TEST(Replacement, StageIntegrandsMatchDirectSums) {
    auto Phi = TestFunction::make_polynomial(0.1, 0.6, {1.0, 0.5});
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto eta = random_config(64, 0.5, seed);
        auto s = stage_integrands(eta, Phi, 0.3, 16, 2, 5);
        auto d = levels_direct(eta, Phi, 0.3, 16, 2, 5);
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(s.level[k], d[k], 1e-13);
        EXPECT_NEAR(s.stage(0) + s.stage(1) + s.stage(2), s.total(), 1e-14);
    }
}

TEST(Replacement, IntermediateGapsOnHandBuiltTrajectory) {
    Trajectory tr;
    tr.params.n = 16;
    tr.params.gamma = 1.0;
    tr.params.T = 0.2;
    tr.params.W = 4.0;
    const std::vector<double> ts{0.0, 0.05, 0.1, 0.2};
    for (std::size_t k = 0; k < ts.size(); ++k) tr.snapshots.push_back({ts[k], random_config(64, 0.5, 10 + k)});
    auto Phi = TestFunction::make_bump(1.0);
    const double eps = 0.5;
    auto g = intermediate_gaps(tr, Phi, eps, 0.1);
    EXPECT_EQ(g.ell, 2); // floor(0.5 * 4)
    EXPECT_EQ(g.L, 8);
    std::array<double, 4> acc{};
    for (std::size_t k = 1; k <= 2; ++k) {
        auto a = levels_direct(tr.snapshots[k - 1].second, Phi, ts[k - 1], 16, 2, 8);
        auto b = levels_direct(tr.snapshots[k].second, Phi, ts[k], 16, 2, 8);
        double h = 0.5 * (ts[k] - ts[k - 1]);
        for (int s = 0; s < 3; ++s) acc[s] += h * ((a[s] - a[s + 1]) + (b[s] - b[s + 1]));
        acc[3] += h * ((a[0] - a[3]) + (b[0] - b[3]));
    }
    EXPECT_NEAR(g.gap1, std::abs(acc[0]), 1e-13);
    EXPECT_NEAR(g.gap2, std::abs(acc[1]), 1e-13);
    EXPECT_NEAR(g.gap3, std::abs(acc[2]), 1e-13);
    EXPECT_NEAR(g.total, std::abs(acc[3]), 1e-13);
    EXPECT_LE(g.telescoping_error, 1e-12);
    EXPECT_LE(g.total, g.gap1 + g.gap2 + g.gap3 + 1e-15);
    EXPECT_DOUBLE_EQ(replacement_gap(tr, Phi, eps, 0.1), g.total);
    EXPECT_THROW(intermediate_gaps(tr, Phi, eps, 0.15), std::domain_error);
    EXPECT_THROW(intermediate_gaps(tr, Phi, 0.01, 0.1), std::invalid_argument);
}

// constant configurations make every box average equal eta(x)eta(x+1)
TEST(Replacement, FullRingHasNoGap) {
    Trajectory tr;
    tr.params.n = 8;
    tr.params.gamma = 1.5;
    tr.params.T = 0.1;
    tr.params.W = 4.0;
    Configuration full(std::vector<std::uint8_t>(32, 1));
    tr.snapshots = {{0.0, full}, {0.1, full}};
    auto g = intermediate_gaps(tr, TestFunction::make_bump(1.0), 0.5, 0.1);
    EXPECT_NEAR(g.total, 0.0, 1e-15);
    EXPECT_NEAR(g.gap1 + g.gap2 + g.gap3, 0.0, 1e-15);
}
