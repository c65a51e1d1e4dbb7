#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include <fpme/harness/config.hpp>
#include <fpme/harness/experiments.hpp>
#include <fpme/harness/stats.hpp>
#include <fpme/harness/suites.hpp>

using namespace fpme;
using namespace fpme::harness;

TEST(Config, DefaultsValidate) {
    ExperimentConfig c;
    c.profile.kind = "step";
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTripAndHash) {
    ExperimentConfig c;
    c.gammas = {0.5, 1.5};
    c.ns = {64, 128};
    c.profile.kind = "bump";
    c.profile.amplitude = 0.2;
    c.pde.m = 3;
    c.pde.geometry = "ring";
    auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    // output directory and threads do not enter the hash
    back.out_dir = "elsewhere";
    back.threads = 7;
    EXPECT_EQ(config_hash(back), config_hash(c));
    back.seed += 1;
    EXPECT_NE(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(config_from_json(nlohmann::json{{"gama", {1.0}}}), usage_error);
    EXPECT_THROW(config_from_json(nlohmann::json{{"gamma", "one"}}), usage_error);
    EXPECT_THROW(config_from_json(nlohmann::json::array()), usage_error);
    auto c = config_from_json(nlohmann::json{{"kind", "hydro"}, {"n", {32}}});
    EXPECT_THROW(c.validate(), usage_error);
    c = config_from_json(nlohmann::json{{"kind", "hydro"}, {"replicas", 16}});
    EXPECT_THROW(c.validate(), usage_error);
    c = config_from_json(nlohmann::json{{"kind", "tables"}, {"n", std::vector<int>{}}});
    EXPECT_THROW(c.validate(), usage_error);
    c = config_from_json(nlohmann::json{{"gamma", {2.0}}});
    EXPECT_THROW(c.validate(), usage_error);
    c = config_from_json(nlohmann::json{{"pde", {{"geometry", "torus"}}}});
    EXPECT_THROW(c.validate(), usage_error);
    EXPECT_THROW(load_config("/nonexistent/config.json"), usage_error);
}

TEST(Config, ExtremeProfileNeedsFlag) {
    auto c = config_from_json(nlohmann::json{{"profile", {{"kind", "step"}, {"high", 1.0}, {"low", 0.2}}}});
    EXPECT_THROW(c.validate(), usage_error);
    c.allow_extreme_profile = true;
    EXPECT_NO_THROW(c.validate());
    c.profile.high = 1.2;
    EXPECT_THROW(c.validate(), usage_error);
}

TEST(Config, RecordGridMergesReportTimes) {
    ExperimentConfig c;
    c.T = 1.0;
    c.record_points = 4;
    c.report_times = {0.3, 0.5};
    auto g = c.record_grid();
    EXPECT_EQ(g, (std::vector<double>{0.0, 0.25, 0.3, 0.5, 0.75, 1.0}));
}

TEST(Config, ProfileShapes) {
    ProfileSpec s;
    s.kind = "step";
    EXPECT_EQ(s(-0.5), 0.8);
    EXPECT_EQ(s(0.0), 0.2);
    EXPECT_EQ(s(1.0), 0.5);
    s.kind = "bump";
    EXPECT_NEAR(s(0.0), 0.5 + 0.3 * std::exp(-1.0), 1e-15);
    EXPECT_EQ(s(1.0), 0.5);
}

TEST(Stats, SummaryAndSlope) {
    auto s = summarize({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.stderr_, std::sqrt(5.0 / 12.0));
    EXPECT_EQ(summarize({}).count, 0u);
    EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 3.0 / 2, 3.0 / 4, 3.0 / 8}), -1.0, 1e-14);
    EXPECT_THROW(loglog_slope({1}, {1}), std::invalid_argument);
}

TEST(Stats, ChiSquareBounds) {
    // k = 10 degrees of freedom: chi2 quantiles 3.940299 (0.05) and 18.307038 (0.95)
    EXPECT_NEAR(variance_upper_bound(1.0, 11, 0.95), 10.0 / 3.940299, 1e-5);
    EXPECT_NEAR(variance_lower_bound(1.0, 11, 0.95), 10.0 / 18.307038, 1e-6);
    EXPECT_LT(variance_lower_bound(2.0, 50, 0.95), 2.0);
    EXPECT_GT(variance_upper_bound(2.0, 50, 0.95), 2.0);
}

TEST(Stats, ParallelForIndependentOfThreads) {
    auto work = [](unsigned threads) {
        std::vector<double> out(200);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng rng(replica_seed(5, i));
            double acc = 0.0;
            for (int k = 0; k < 1000; ++k) acc += rng.uniform();
            out[i] = acc;
        });
        return out;
    };
    auto a = work(1);
    EXPECT_EQ(a, work(2));
    EXPECT_EQ(a, work(5));
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                 std::runtime_error);
}

TEST(Seeds, StreamsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::int64_t n : {64, 128, 256, 512})
        for (double g : {0.5, 1.0, 1.5})
            for (std::uint64_t s : {1u, 2u}) seen.insert(stream_seed(s, n, g));
    EXPECT_EQ(seen.size(), 24u);
    EXPECT_EQ(stream_seed(9, 64, 1.0), stream_seed(9, 64, 1.0));
}

TEST(Tables, DeterministicAndValidated) {
    auto G = TestFunction::make_bump(1.0);
    EXPECT_THROW(run_tables({1.0}, {}, G), usage_error);
    EXPECT_THROW(run_tables({}, {64}, G), usage_error);
    auto a = run_tables({0.5, 1.5}, {64, 128}, G);
    auto b = run_tables({0.5, 1.5}, {64, 128}, G);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    ASSERT_EQ(a.rows.size(), 12u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].value, b.rows[i].value);
    EXPECT_EQ(a.slopes.size(), 6u);
    // the calibrated bound equals the value at the smallest n
    for (const auto& r : a.rows)
        if (r.table == "convext" && r.n == 64) EXPECT_NEAR(r.bound, r.value, 1e-15 * std::abs(r.value));
    EXPECT_DOUBLE_EQ(convext_exponent(0.5), -0.5);
    EXPECT_DOUBLE_EQ(convext_exponent(1.0), -0.5);
    EXPECT_DOUBLE_EQ(convext_exponent(1.5), -0.5);
}

TEST(Paths, SmallAuditIsClean) {
    auto a = audit_paths(4, 6, 20, 200, 3);
    EXPECT_GT(a.paths_checked, 0);
    EXPECT_EQ(a.failures, 0);
    EXPECT_EQ(a.random_failures, 0);
    EXPECT_TRUE(a.gap_repetition_r.empty());
    EXPECT_EQ(to_json(a)["failures"], 0);
}

TEST(Hydro, SmallRunIndependentOfThreads) {
    ExperimentConfig c;
    c.kind = "hydro";
    c.gammas = {1.0};
    c.ns = {64};
    c.replicas = 32;
    c.T = 0.02;
    c.record_points = 4;
    c.report_times = {0.0, 0.02};
    c.profile.kind = "step";
    c.pde.n_pde = 256;
    c.eps = 0.1;
    EXPECT_THROW(c.validate(), usage_error); // box of floor(0.8) sites
    c.eps = 0.2;
    c.threads = 1;
    auto a = run_hydro(c);
    c.threads = 3;
    auto b = run_hydro(c);
    ASSERT_EQ(a.cells.size(), 2u);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        EXPECT_EQ(a.cells[i].D, b.cells[i].D);
        EXPECT_EQ(a.cells[i].means, b.cells[i].means);
    }
    ASSERT_EQ(a.gaps.size(), b.gaps.size());
    for (std::size_t i = 0; i < a.gaps.size(); ++i) EXPECT_EQ(a.gaps[i].mean, b.gaps[i].mean);
    EXPECT_LE(a.max_telescoping_error, 1e-12);
    // at t = 0 the pairing is a sum of independent Bernoullis around the reference
    const auto& c0 = a.cells.front();
    EXPECT_EQ(c0.t, 0.0);
    EXPECT_LE(c0.D, 5.0 * c0.stderr_ + 1e-3);
    EXPECT_FALSE(a.density.empty());
    for (const auto& cell : a.cells) {
        ASSERT_EQ(cell.reference_line.size(), cell.reference.size());
        double d_line = 0.0;
        for (std::size_t g = 0; g < cell.means.size(); ++g)
            d_line = std::max(d_line, std::abs(cell.means[g] - cell.reference_line[g]));
        EXPECT_EQ(cell.D_line, d_line);
        // ring of 512 sites: jumps beyond 255 are dropped
        EXPECT_NEAR(cell.truncated_rate, 64.0 * JumpKernel(1.0, 1).tail_mass(255), 1e-12);
    }
    // both geometries start from the same data
    EXPECT_EQ(c0.reference, c0.reference_line);
}

TEST(Suites, NamesAndUnknown) {
    SuiteRunner r(SuiteOptions{});
    EXPECT_EQ(SuiteRunner::names().size(), 12u);
    EXPECT_THROW(r.run("bogus"), usage_error);
    auto ok = r.run("nn-identity");
    EXPECT_TRUE(ok.passed);
    EXPECT_EQ(ok.name, "nn-identity");
}

TEST(Suites, MutationsBreakReversibility) {
    SuiteOptions o;
    EXPECT_TRUE(SuiteRunner(o).run("reversibility").passed);
    o.mutation = RateMutation::negate_tilde_c;
    EXPECT_FALSE(SuiteRunner(o).run("reversibility").passed);
    o.mutation = RateMutation::one_sided_tilde_c;
    EXPECT_FALSE(SuiteRunner(o).run("reversibility").passed);
}
