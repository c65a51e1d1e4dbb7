#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include <fpme/io.hpp>
#include <fpme/lattice.hpp>
#include <fpme/simulator.hpp>

using namespace fpme;

namespace {

Configuration random_config(std::int64_t N, double b, std::uint64_t seed) {
    Rng rng(seed);
    return sample_configuration(ProductMeasure::constant(N, b), rng);
}

SimParams params(std::int64_t n, double gamma, double T, double W, std::uint64_t seed) {
    SimParams p;
    p.n = n;
    p.gamma = gamma;
    p.T = T;
    p.W = W;
    p.seed = seed;
    p.record_times = uniform_grid(T, 8);
    return p;
}

// TV distance between the simulated law at microscopic time t and row s0 of exp(tQ)
double small_system_tv(std::int64_t n, double gamma, double t_micro, int R, std::uint64_t seed) {
    const int N = 6;
    SmallSystem sys(N, gamma);
    Configuration start(std::vector<std::uint8_t>{1, 0, 1, 1, 0, 0});
    auto exact = transition_row(sys, SmallSystem::index(start), t_micro);
    SimParams p;
    p.n = n;
    p.W = static_cast<double>(N) / n;
    p.gamma = gamma;
    p.T = t_micro / std::pow(static_cast<double>(n), gamma);
    p.record_times = {p.T};
    std::vector<double> hist(sys.states(), 0.0);
    for (int r = 0; r < R; ++r) {
        p.seed = replica_seed(seed, r);
        hist[SmallSystem::index(run(start, p).at(p.T))] += 1.0 / R;
    }
    double tv = 0.0;
    for (std::size_t s = 0; s < hist.size(); ++s) tv += 0.5 * std::abs(hist[s] - exact[s]);
    return tv;
}

} // namespace

TEST(SimParams, Validation) {
    SimParams p = params(10, 1.0, 1.0, 0.35, 1);
    EXPECT_THROW(p.validate(), std::invalid_argument); // n W = 3.5
    p = params(10, 1.0, 1.0, 2.0, 1);
    p.record_times = {0.5, 0.2};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.record_times = {0.0, 1.5};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = params(10, 2.5, 1.0, 2.0, 1);
    EXPECT_THROW(p.validate(), std::domain_error);
    p = params(10, 1.0, 1.0, 2.0, 1);
    EXPECT_THROW(run(Configuration(5), p), std::invalid_argument);
}

TEST(Simulator, SiteCoordinates) {
    EXPECT_EQ(site_coordinate(0, 8), -4);
    EXPECT_EQ(site_coordinate(4, 8), 0);
    EXPECT_EQ(site_coordinate(6, 7), 3);
    EXPECT_EQ(ring_kernel(1.0, 8).truncation(), 3);
    EXPECT_EQ(ring_kernel(1.0, 9).truncation(), 4);
}

TEST(Simulator, DeterministicUnderSeed) {
    auto p = params(32, 1.0, 0.2, 4.0, 99);
    auto eta = random_config(p.ring_size(), 0.4, 5);
    auto a = run(eta, p), b = run(eta, p);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) EXPECT_EQ(a.snapshots[k].second, b.snapshots[k].second);
    EXPECT_EQ(a.event_count, b.event_count);
    p.seed = 100;
    auto c = run(eta, p);
    EXPECT_NE(a.snapshots.back().second, c.snapshots.back().second);
}

TEST(Simulator, ConservesParticlesAndRecordsGrid) {
    for (double g : {0.5, 1.0, 1.5}) {
        auto p = params(64, g, 0.1, 2.0, 7);
        auto eta = random_config(p.ring_size(), 0.5, 8);
        auto tr = run(eta, p);
        ASSERT_EQ(tr.snapshots.size(), p.record_times.size());
        for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
            EXPECT_DOUBLE_EQ(tr.snapshots[k].first, p.record_times[k]);
            EXPECT_EQ(tr.snapshots[k].second.particle_count(), eta.particle_count());
        }
        EXPECT_EQ(tr.snapshots.front().second, eta);
        EXPECT_GT(tr.event_count, 0);
        EXPECT_LE(tr.event_count, tr.proposal_count);
    }
}

TEST(Simulator, EmptyAndFullRingsAreFrozen) {
    auto p = params(16, 1.0, 1.0, 1.0, 3);
    Configuration empty(16), full(std::vector<std::uint8_t>(16, 1));
    EXPECT_EQ(run(empty, p).snapshots.back().second, empty);
    EXPECT_EQ(run(full, p).snapshots.back().second, full);
}

// law at a fixed time against the exact transition row, unscaled and with the n^gamma speed-up
TEST(Simulator, SmallRingLawMatchesMatrixExponential) {
    EXPECT_LE(small_system_tv(1, 1.0, 0.5, 30000, 41), 0.035);
    EXPECT_LE(small_system_tv(2, 1.5, 0.8, 30000, 42), 0.035);
    EXPECT_LE(small_system_tv(3, 0.5, 0.3, 30000, 43), 0.035);
}

TEST(Generator, DecompositionMatchesDirectSum) {
    std::vector<TestFunction> Gs{TestFunction::make_bump(0.5), TestFunction::make_shifted(0.3, 0.4),
                                 TestFunction::make_polynomial(-0.2, 0.6, {1.0, 2.0})};
    for (double g : {0.5, 1.0, 1.5})
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto eta = random_config(128, 0.5, seed);
            for (const auto& G : Gs) {
                auto a = generator_action(eta, G, 0.3, 64, g);
                double direct = generator_action_direct(eta, G, 0.3, 64, g);
                EXPECT_NEAR(a.principal + a.remainder, direct, 1e-11 * std::max(1.0, std::abs(direct)));
            }
        }
}

TEST(Dynkin, ExactTrackerMatchesFineQuadrature) {
    auto G = TestFunction::make_polynomial(0.0, 0.5, {1.0, 1.0});
    auto p = params(32, 1.0, 0.05, 2.0, 11);
    p.record_times = uniform_grid(0.05, 2000);
    auto eta = random_config(p.ring_size(), 0.5, 12);
    auto exact = run_diagnostic(eta, p, {G});
    auto plain = run(eta, p);
    // the observer does not touch the random stream
    EXPECT_EQ(exact.snapshots.back().second, plain.snapshots.back().second);
    double m_exact = dynkin_residual(exact, G, 0.05);
    double m_quad = dynkin_residual(plain, G, 0.05);
    EXPECT_NEAR(m_exact, m_quad, 2e-4);
    EXPECT_THROW(dynkin_residual(plain, G, 0.012345), std::domain_error);
}

TEST(Dynkin, MeanZeroUnderProductMeasure) {
    auto G = TestFunction::make_polynomial(0.0, 0.5, {1.0, 1.0});
    auto p = params(64, 1.0, 0.1, 2.0, 0);
    p.record_times = {0.0, 0.1};
    const int R = 200;
    double s = 0, s2 = 0;
    for (int r = 0; r < R; ++r) {
        p.seed = replica_seed(77, 2 * r + 1);
        auto eta = random_config(p.ring_size(), 0.5, replica_seed(77, 2 * r));
        double m = dynkin_residual(run_diagnostic(eta, p, {G}), G, 0.1);
        s += m;
        s2 += m * m;
    }
    double mean = s / R, se = std::sqrt((s2 / R - mean * mean) / (R - 1));
    EXPECT_LE(std::abs(mean), 4.0 * se);
}

TEST(Pairing, EmpiricalPairingSums) {
    Configuration eta(8);
    eta.set(4, 1); // coordinate 0
    eta.set(6, 1); // coordinate 2
    auto G = TestFunction::make_shifted(0.5, 0.6);
    EXPECT_DOUBLE_EQ(profile_pairing(eta, G, 4), (G.profile(0.0) + G.profile(0.5)) / 4.0);
    auto H = TestFunction::make_polynomial(0.0, 1.0, {2.0, 1.0});
    EXPECT_DOUBLE_EQ(pairing(eta, H, 1.0, 4), 3.0 * profile_pairing(eta, H, 4));
}

TEST(Io, PackRoundTrip) {
    for (std::int64_t N : {1, 7, 8, 9, 100}) {
        auto eta = random_config(N, 0.5, static_cast<std::uint64_t>(N));
        auto bytes = pack_bits(eta);
        EXPECT_EQ(bytes.size(), static_cast<std::size_t>((N + 7) / 8));
        EXPECT_EQ(unpack_bits(bytes.data(), bytes.size(), N), eta);
    }
    Configuration one(10);
    one.set(0, 1);
    one.set(9, 1);
    auto b = pack_bits(one);
    EXPECT_EQ(b[0], 0x01);
    EXPECT_EQ(b[1], 0x02);
}

TEST(Io, SnapshotLayout) {
    Snapshot s{random_config(21, 0.5, 4), 0x0102030405060708ULL, 0.25};
    auto bytes = encode_snapshot(s);
    ASSERT_EQ(bytes.size(), 36u + 3u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FPMS");
    EXPECT_EQ(bytes[4], 21);
    EXPECT_EQ(bytes[12], 0x08);
    EXPECT_EQ(bytes[19], 0x01);
    auto back = decode_snapshot(bytes);
    EXPECT_EQ(back.eta, s.eta);
    EXPECT_EQ(back.seed, s.seed);
    EXPECT_EQ(back.time, s.time);
    bytes[0] = 'X';
    EXPECT_THROW(decode_snapshot(bytes), std::runtime_error);
    bytes[0] = 'F';
    bytes.pop_back();
    EXPECT_THROW(decode_snapshot(bytes), std::runtime_error);
}

TEST(Io, Base64KnownVectors) {
    auto enc = [](const std::string& s) { return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end())); };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foo"), "Zm9v");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
    for (std::string s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) {
        auto d = base64_decode(enc(s));
        EXPECT_EQ(std::string(d.begin(), d.end()), s);
    }
    Rng rng(1);
    for (int len = 0; len < 40; ++len) {
        std::vector<std::uint8_t> v(static_cast<std::size_t>(len));
        for (auto& x : v) x = static_cast<std::uint8_t>(rng.below(256));
        EXPECT_EQ(base64_decode(base64_encode(v)), v);
    }
}

TEST(Io, TrajectoryJsonLines) {
    auto p = params(16, 1.0, 0.1, 2.0, 5);
    p.record_times = {0.0, 0.05, 0.1};
    auto eta = random_config(32, 0.5, 6);
    auto tr = run(eta, p);
    std::ostringstream os;
    write_trajectory_jsonl(os, tr, {{"replica", 3}});
    std::istringstream is(os.str());
    std::string line;
    std::vector<nlohmann::json> recs;
    while (std::getline(is, line)) recs.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(recs.size(), 4u);
    EXPECT_EQ(recs[0]["type"], "header");
    EXPECT_EQ(recs[0]["replica"], 3);
    EXPECT_EQ(recs[0]["N"], 32);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& r = recs[k + 1];
        EXPECT_DOUBLE_EQ(r["t"].get<double>(), p.record_times[k]);
        auto bytes = base64_decode(r["occupancy"].get<std::string>());
        auto back = unpack_bits(bytes.data(), bytes.size(), 32);
        EXPECT_EQ(back, tr.snapshots[k].second);
        EXPECT_EQ(r["particle_count"], eta.particle_count());
    }
    std::ostringstream again;
    write_trajectory_jsonl(again, run(eta, p), {{"replica", 3}});
    EXPECT_EQ(os.str(), again.str());
}
