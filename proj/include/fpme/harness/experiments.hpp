#ifndef FPME_HARNESS_EXPERIMENTS_HPP
#define FPME_HARNESS_EXPERIMENTS_HPP

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "../lattice.hpp"
#include "../measure.hpp"
#include "../operators.hpp"
#include "../paths.hpp"
#include "../pde.hpp"
#include "../simulator.hpp"
#include "config.hpp"
#include "stats.hpp"

namespace fpme::harness {

/// Seed of the replica stream for one (n, gamma) cell of an experiment.
inline std::uint64_t stream_seed(std::uint64_t seed, std::int64_t n, double gamma) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(n)) ^
                      splitmix64(std::bit_cast<std::uint64_t>(gamma)));
}

/// Fixed panel of test functions for the hydrodynamic comparison.
inline std::vector<TestFunction> hydro_panel() {
    return {TestFunction::make_bump(0.5),          TestFunction::make_shifted(-0.5, 0.5),
            TestFunction::make_shifted(0.5, 0.5),  TestFunction::make_shifted(-1.0, 0.5),
            TestFunction::make_shifted(1.0, 0.5),  TestFunction::make_bump(1.0)};
}

/// Weight Phi of the replacement-gap diagnostics.
inline TestFunction replacement_weight() { return TestFunction::make_bump(1.0); }

inline ProductMeasure initial_measure(const ProfileSpec& g, std::int64_t n, std::int64_t N) {
    ProductMeasure mu;
    mu.profile.resize(static_cast<std::size_t>(N));
    for (std::int64_t i = 0; i < N; ++i) mu.profile[i] = g(static_cast<double>(site_coordinate(i, N)) / n);
    return mu;
}

struct HydroCell {
    double gamma = 1.0;
    std::int64_t n = 0;
    double t = 0.0;
    double D = 0.0;
    double stderr_ = 0.0;
    int argmax = 0;
    std::vector<double> means, stderrs;
    std::vector<double> reference;      // PDE on the ring geometry; D is measured against it
    std::vector<double> reference_line; // PDE on the line with the far field frozen at b
    double D_line = 0.0;                // max_G |mean - reference_line|
    double truncated_rate = 0.0;        // n^gamma sum_{|z| > L} p(z): rate of dropped long jumps per particle
    double ci_low() const { return D - 1.96 * stderr_; }
    double ci_high() const { return D + 1.96 * stderr_; }
};

struct GapCell {
    double gamma = 1.0;
    std::int64_t n = 0;
    double eps = 0.0;
    double t = 0.0;
    std::string stage; // "1", "2", "3" or "total"
    double mean = 0.0;
    double stderr_ = 0.0;
    int replicas = 0;
};

/// Replica-mean occupation over a bin of sites, for plotting.
struct DensityRow {
    double gamma;
    std::int64_t n;
    double t;
    double u; // bin centre
    double density;
};

struct HydroResult {
    std::vector<HydroCell> cells;
    std::vector<DensityRow> density;
    std::vector<GapCell> gaps;
    double max_telescoping_error = 0.0;
    double wall_seconds = 0.0;
};

/**
 * Replicas of the particle system from the product measure of the profile,
 * paired with the hydrodynamic panel at the report times and compared with the
 * PDE solution from the same profile; staged replacement gaps at t = T.
 * D uses the ring-geometry PDE, which is the limit of the simulated ring at fixed W.
 * The line-PDE deviation D_line is reported next to it; the two references differ
 * by the boundary influence of the jumps beyond W/2.
 */
inline HydroResult run_hydro(const ExperimentConfig& cfg,
                             const std::function<void(const std::string&)>& log = nullptr) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    const auto panel = hydro_panel();
    const auto phi = replacement_weight();
    const auto grid = cfg.record_grid();
    HydroResult result;

    for (double gamma : cfg.gammas) {
        PdeParams pp;
        pp.gamma = gamma;
        pp.m = cfg.pde.m;
        pp.b = cfg.profile.b;
        pp.W = cfg.W;
        pp.n_pde = cfg.pde.n_pde;
        pp.T = cfg.T;
        pp.cfl = cfg.pde.cfl;
        pp.record_times = cfg.report_times;
        auto panel_reference = [&](Geometry geometry) {
            pp.geometry = geometry;
            auto sol = integrate([&](double u) { return cfg.profile(u); }, pp);
            std::vector<std::vector<double>> ref(cfg.report_times.size());
            for (std::size_t k = 0; k < cfg.report_times.size(); ++k) {
                const auto& f = sol.at(cfg.report_times[k]);
                for (const auto& G : panel) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < pp.cells(); ++i) acc += f.values[i] * G.profile(f.u(i));
                    ref[k].push_back(acc * pp.h());
                }
            }
            return ref;
        };
        const auto ref = panel_reference(Geometry::ring);
        const auto ref_line = panel_reference(Geometry::line);
        if (log) log("pde reference ready for gamma=" + std::to_string(gamma));

        for (std::int64_t n : cfg.ns) {
            SimParams sp;
            sp.n = n;
            sp.gamma = gamma;
            sp.T = cfg.T;
            sp.W = cfg.W;
            sp.record_times = grid;
            sp.validate();
            const auto mu = initial_measure(cfg.profile, n, sp.ring_size());
            const std::uint64_t base = stream_seed(cfg.seed, n, gamma);
            const std::size_t R = static_cast<std::size_t>(cfg.replicas);

            // per replica: pairings [time][G], gaps [4], telescoping error
            std::vector<std::vector<std::vector<double>>> pair(R);
            std::vector<std::array<double, 4>> gaps(R);
            std::vector<double> tele(R, 0.0);
            // bins of n/16 sites
            const std::int64_t N = sp.ring_size();
            const std::int64_t bin = std::max<std::int64_t>(1, n / 16);
            const std::int64_t bins = (N + bin - 1) / bin;
            std::vector<std::vector<std::vector<double>>> occ(R);
            parallel_for(R, cfg.threads, [&](std::size_t r) {
                Rng rng(replica_seed(base, 2 * r));
                Configuration eta = sample_configuration(mu, rng);
                SimParams p = sp;
                p.seed = replica_seed(base, 2 * r + 1);
                Trajectory tr = run(eta, p);
                pair[r].resize(cfg.report_times.size());
                for (std::size_t k = 0; k < cfg.report_times.size(); ++k) {
                    const auto& c = tr.at(cfg.report_times[k]);
                    for (const auto& G : panel) pair[r][k].push_back(profile_pairing(c, G, n));
                }
                occ[r].assign(cfg.report_times.size(), std::vector<double>(static_cast<std::size_t>(bins), 0.0));
                for (std::size_t k = 0; k < cfg.report_times.size(); ++k) {
                    const auto& c = tr.at(cfg.report_times[k]);
                    for (std::int64_t i = 0; i < N; ++i) occ[r][k][i / bin] += c[i];
                }
                StagedGaps sg = intermediate_gaps(tr, phi, cfg.eps, cfg.T);
                gaps[r] = {sg.gap1, sg.gap2, sg.gap3, sg.total};
                tele[r] = sg.telescoping_error;
            });

            for (std::size_t k = 0; k < cfg.report_times.size(); ++k) {
                HydroCell cell;
                cell.gamma = gamma;
                cell.n = n;
                cell.t = cfg.report_times[k];
                cell.reference = ref[k];
                cell.reference_line = ref_line[k];
                const JumpKernel jk = ring_kernel(gamma, N);
                cell.truncated_rate = std::pow(static_cast<double>(n), gamma) * jk.tail_mass(jk.truncation());
                for (std::size_t g = 0; g < panel.size(); ++g) {
                    std::vector<double> xs(R);
                    for (std::size_t r = 0; r < R; ++r) xs[r] = pair[r][k][g];
                    Summary s = summarize(xs);
                    cell.means.push_back(s.mean);
                    cell.stderrs.push_back(s.stderr_);
                    cell.D_line = std::max(cell.D_line, std::abs(s.mean - ref_line[k][g]));
                    double dev = std::abs(s.mean - ref[k][g]);
                    if (g == 0 || dev > cell.D) {
                        cell.D = dev;
                        cell.stderr_ = s.stderr_;
                        cell.argmax = static_cast<int>(g);
                    }
                }
                result.cells.push_back(cell);
            }
            for (std::size_t k = 0; k < cfg.report_times.size(); ++k)
                for (std::int64_t b = 0; b < bins; ++b) {
                    double acc = 0.0;
                    for (std::size_t r = 0; r < R; ++r) acc += occ[r][k][b];
                    std::int64_t lo = b * bin, hi = std::min(N, lo + bin);
                    double centre = 0.5 * static_cast<double>(site_coordinate(lo, N) + site_coordinate(hi - 1, N)) / n;
                    result.density.push_back({gamma, n, cfg.report_times[k], centre,
                                              acc / (static_cast<double>(R) * static_cast<double>(hi - lo))});
                }
            static const char* names[4] = {"1", "2", "3", "total"};
            for (int s = 0; s < 4; ++s) {
                std::vector<double> xs(R);
                for (std::size_t r = 0; r < R; ++r) xs[r] = gaps[r][s];
                Summary sm = summarize(xs);
                result.gaps.push_back({gamma, n, cfg.eps, cfg.T, names[s], sm.mean, sm.stderr_, cfg.replicas});
            }
            for (double e : tele) result.max_telescoping_error = std::max(result.max_telescoping_error, e);
            if (log) log("hydro cell done: gamma=" + std::to_string(gamma) + " n=" + std::to_string(n));
        }
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

/// Operator-convergence tables for a fixed bump test function.
struct TableRow {
    std::string table; // convdisc, convext, corfrac
    double gamma;
    std::int64_t n;
    double value;
    double bound; // tail bound (convdisc, corfrac) or calibrated rhs (convext)
};

struct TableResult {
    std::vector<TableRow> rows;
    struct Slope {
        std::string table;
        double gamma;
        double slope;
        double expected; // predicted exponent, NaN when none
        double constant; // calibrated constant (convext only)
    };
    std::vector<Slope> slopes;
};

/// Exponent -min{2-gamma, 1, 1+delta_gamma-gamma} of the remainder bound.
inline double convext_exponent(double gamma) {
    return -std::min({2.0 - gamma, 1.0, 1.0 + delta_gamma(gamma) - gamma});
}

inline TableResult run_tables(const std::vector<double>& gammas, const std::vector<std::int64_t>& ns,
                              const TestFunction& G) {
    if (ns.empty()) throw usage_error("n list is empty");
    if (gammas.empty()) throw usage_error("gamma list is empty");
    TableResult out;
    for (double gamma : gammas) {
        std::vector<double> xs, disc, ext, cor;
        for (std::int64_t n : ns) {
            auto g = convdisc_gap(G, n, gamma);
            auto c = corfrac_sum(G, n, gamma);
            double e = convext_lhs(G, n, gamma);
            xs.push_back(static_cast<double>(n));
            disc.push_back(g.value);
            ext.push_back(e);
            cor.push_back(c.value);
            out.rows.push_back({"convdisc", gamma, n, g.value, g.tail_bound});
            out.rows.push_back({"corfrac", gamma, n, c.value, c.tail_bound + c.taylor_bound});
        }
        // calibrate C at the smallest n
        double C = ext.front() / convext_rate(ns.front(), gamma);
        for (std::size_t i = 0; i < ns.size(); ++i)
            out.rows.push_back({"convext", gamma, ns[i], ext[i], C * convext_rate(ns[i], gamma)});
        double nan = std::nan("");
        if (ns.size() >= 2) {
            out.slopes.push_back({"convdisc", gamma, loglog_slope(xs, disc), nan, nan});
            out.slopes.push_back({"convext", gamma, loglog_slope(xs, ext), convext_exponent(gamma), C});
            out.slopes.push_back({"corfrac", gamma, loglog_slope(xs, cor), nan, nan});
        }
    }
    return out;
}

/// Audit of the moving-particle paths: exhaustive local patterns for r in [r_lo, r_hi].
struct PathAudit {
    std::int64_t paths_checked = 0;
    std::int64_t failures = 0;          // final state wrong or a zero-rate step
    std::int64_t max_jump_violations = 0; // jump longer than 2m
    std::vector<std::pair<std::int64_t, std::int64_t>> degenerate; // (r, j) without a valid scheme
    std::int64_t random_checked = 0;
    std::int64_t random_failures = 0;
    std::int64_t multiplicity_literal = 0;
    std::int64_t multiplicity_per_family = 0;
    std::vector<std::int64_t> gap_repetition_r; // r with repeated nonzero hop lengths
};

inline PathAudit audit_paths(std::int64_t r_lo, std::int64_t r_hi, std::int64_t random_r_max, int random_cases,
                             std::uint64_t seed) {
    PathAudit a;
    for (std::int64_t r = r_lo; r <= r_hi; ++r) {
        const std::int64_t m = half_index(r);
        // window of sites x-3 .. x+r+1 with x = 3
        const std::int64_t x = 3, N = r + 6;
        const std::int64_t free_sites = N - 2;
        for (std::int64_t j = 1; j <= m; ++j) {
            if (mpl_degenerate(r, j)) {
                a.degenerate.emplace_back(r, j);
                continue;
            }
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_sites); ++mask) {
                Configuration eta(N + 4); // padding keeps the ring from wrapping onto the path
                std::int64_t bit = 0;
                for (std::int64_t s = 0; s < N; ++s) {
                    if (s == x - 1 || s == x - 2) {
                        eta.set(s, 1);
                        continue;
                    }
                    eta.set(s, static_cast<int>((mask >> bit++) & 1u));
                }
                auto path = mpl_path(eta, x, r, j);
                auto rep = apply_path(eta, path);
                ++a.paths_checked;
                if (rep.final_state != exchange(eta, x, x + r) || !rep.all_steps_allowed) ++a.failures;
                if (rep.max_jump > 2 * m) ++a.max_jump_violations;
            }
        }
    }
    Rng rng(seed);
    for (int c = 0; c < random_cases; ++c) {
        std::int64_t r = 3 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(random_r_max - 2)));
        std::int64_t m = half_index(r);
        std::int64_t j = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(m)));
        if (mpl_degenerate(r, j)) continue;
        std::int64_t N = 2 * r + 16, x = 5;
        Configuration eta(N);
        for (std::int64_t s = 0; s < N; ++s) eta.set(s, rng.bernoulli(0.5));
        eta.set(x - 1, 1);
        eta.set(x - 2, 1);
        auto rep = apply_path(eta, mpl_path(eta, x, r, j));
        ++a.random_checked;
        if (rep.final_state != exchange(eta, x, x + r) || !rep.all_steps_allowed || rep.max_jump > 2 * m)
            ++a.random_failures;
    }
    for (std::int64_t r = r_lo; r <= std::max(r_hi, random_r_max); ++r) {
        auto mult = bond_multiplicity(0, 100, r);
        a.multiplicity_literal = std::max(a.multiplicity_literal, mult.literal_max);
        a.multiplicity_per_family = std::max(a.multiplicity_per_family, mult.per_family_max);
    }
    for (std::int64_t r = 1; r <= 200; ++r)
        if (!gaps_distinct(r)) a.gap_repetition_r.push_back(r);
    return a;
}

inline nlohmann::json to_json(const PathAudit& a) {
    nlohmann::json deg = nlohmann::json::array();
    for (auto [r, j] : a.degenerate) deg.push_back({{"r", r}, {"j", j}});
    return {{"paths_checked", a.paths_checked},
            {"failures", a.failures},
            {"max_jump_violations", a.max_jump_violations},
            {"degenerate", deg},
            {"random_checked", a.random_checked},
            {"random_failures", a.random_failures},
            {"bond_multiplicity_literal", a.multiplicity_literal},
            {"bond_multiplicity_per_family", a.multiplicity_per_family},
            {"gap_repetition_r", a.gap_repetition_r}};
}

} // namespace fpme::harness

#endif
