// fpme: command line front end for the simulator, PDE solver and checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <fpme/harness/config.hpp>
#include <fpme/harness/experiments.hpp>
#include <fpme/harness/suites.hpp>
#include <fpme/io.hpp>
#include <fpme/pde.hpp>
#include <fpme/simulator.hpp>

namespace fs = std::filesystem;
using namespace fpme;
using namespace fpme::harness;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--out", c.out, "output directory (overrides the config)");
    sub->add_option("--threads", c.threads, "worker threads (overrides the config)");
}

ExperimentConfig resolve(const Common& c, const std::string& kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    if (!c.config.empty()) cfg = load_config(c.config, cfg);
    if (cfg.kind != kind) throw usage_error("config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.threads) cfg.threads = *c.threads;
    if (cfg.threads == 0) throw usage_error("threads must be >= 1");
    cfg.validate();
    if (cfg.allow_extreme_profile && (cfg.profile.min_value() <= 0.0 || cfg.profile.max_value() >= 1.0))
        std::cerr << "warning: initial profile touches 0 or 1; the entropy bound does not hold\n";
    return cfg;
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    std::ofstream os(fs::path(cfg.out_dir) / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (fs::path(cfg.out_dir) / name).string());
    os << std::setprecision(17);
    return os;
}

/// Columns every emitted row carries.
std::string stamp(const ExperimentConfig& cfg) {
    return std::string(version()) + "," + std::to_string(cfg.seed) + "," + config_hash(cfg);
}
const char* stamp_header = "version,seed,config_hash";

void write_config(const ExperimentConfig& cfg) {
    auto os = open_out(cfg, "config.json");
    auto j = to_json(cfg);
    j["version"] = version();
    j["config_hash"] = config_hash(cfg);
    os << j.dump(2) << "\n";
}

int cmd_simulate(const ExperimentConfig& cfg) {
    write_config(cfg);
    for (double gamma : cfg.gammas)
        for (std::int64_t n : cfg.ns) {
            SimParams sp;
            sp.n = n;
            sp.gamma = gamma;
            sp.T = cfg.T;
            sp.W = cfg.W;
            sp.record_times = cfg.record_grid();
            sp.validate();
            const auto mu = initial_measure(cfg.profile, n, sp.ring_size());
            const std::uint64_t base = stream_seed(cfg.seed, n, gamma);
            std::vector<Trajectory> trajs(static_cast<std::size_t>(cfg.replicas));
            parallel_for(trajs.size(), cfg.threads, [&](std::size_t r) {
                Rng rng(replica_seed(base, 2 * r));
                SimParams p = sp;
                p.seed = replica_seed(base, 2 * r + 1);
                trajs[r] = run(sample_configuration(mu, rng), p);
            });
            std::ostringstream name;
            name << "trajectories_g" << gamma << "_n" << n << ".jsonl";
            auto os = open_out(cfg, name.str());
            for (std::size_t r = 0; r < trajs.size(); ++r)
                write_trajectory_jsonl(os, trajs[r],
                                       {{"replica", r}, {"version", version()}, {"config_hash", config_hash(cfg)},
                                        {"master_seed", cfg.seed}});
            std::cerr << "wrote " << name.str() << "\n";
        }
    return 0;
}

int cmd_solve(const ExperimentConfig& cfg) {
    write_config(cfg);
    auto os = open_out(cfg, "solution.csv");
    os << "gamma,t,u,rho," << stamp_header << "\n";
    for (double gamma : cfg.gammas) {
        PdeParams p;
        p.gamma = gamma;
        p.m = cfg.pde.m;
        p.b = cfg.profile.b;
        p.W = cfg.W;
        p.n_pde = cfg.pde.n_pde;
        p.T = cfg.T;
        p.cfl = cfg.pde.cfl;
        p.record_times = cfg.report_times;
        p.geometry = cfg.pde.geometry == "ring" ? Geometry::ring : Geometry::line;
        auto sol = integrate([&](double u) { return cfg.profile(u); }, p);
        for (const auto& f : sol.frames)
            for (std::int64_t i = 0; i < p.cells(); ++i)
                os << gamma << "," << f.time << "," << f.u(i) << "," << f.values[i] << "," << stamp(cfg) << "\n";
    }
    return 0;
}

int cmd_hydro(const ExperimentConfig& cfg) {
    write_config(cfg);
    auto h = run_hydro(cfg, [](const std::string& s) { std::cerr << s << "\n"; });
    {
        auto os = open_out(cfg, "hydro_D.csv");
        os << "gamma,n,t,D,stderr,ci_low,ci_high,argmax_G,replicas,D_line,truncated_rate," << stamp_header << "\n";
        for (const auto& c : h.cells)
            os << c.gamma << "," << c.n << "," << c.t << "," << c.D << "," << c.stderr_ << "," << c.ci_low() << ","
               << c.ci_high() << "," << c.argmax << "," << cfg.replicas << "," << c.D_line << "," << c.truncated_rate
               << "," << stamp(cfg) << "\n";
    }
    {
        auto os = open_out(cfg, "hydro_pairings.csv");
        os << "gamma,n,t,G,mean,stderr,reference,reference_line," << stamp_header << "\n";
        for (const auto& c : h.cells)
            for (std::size_t g = 0; g < c.means.size(); ++g)
                os << c.gamma << "," << c.n << "," << c.t << "," << g << "," << c.means[g] << "," << c.stderrs[g] << ","
                   << c.reference[g] << "," << c.reference_line[g] << "," << stamp(cfg) << "\n";
    }
    {
        auto os = open_out(cfg, "replacement_gaps.csv");
        os << "n,gamma,eps,t,stage,mean,stderr,replicas," << stamp_header << "\n";
        for (const auto& g : h.gaps)
            os << g.n << "," << g.gamma << "," << g.eps << "," << g.t << "," << g.stage << "," << g.mean << ","
               << g.stderr_ << "," << g.replicas << "," << stamp(cfg) << "\n";
    }
    {
        auto os = open_out(cfg, "density.csv");
        os << "gamma,n,t,u,density," << stamp_header << "\n";
        for (const auto& d : h.density)
            os << d.gamma << "," << d.n << "," << d.t << "," << d.u << "," << d.density << "," << stamp(cfg) << "\n";
    }
    std::cerr << "telescoping error " << h.max_telescoping_error << ", " << h.wall_seconds << " s\n";
    return 0;
}

int cmd_tables(const ExperimentConfig& cfg) {
    write_config(cfg);
    auto res = run_tables(cfg.gammas, cfg.ns, TestFunction::make_bump(1.0));
    for (const char* table : {"convdisc", "convext", "corfrac"}) {
        auto os = open_out(cfg, std::string(table) + ".csv");
        os << "gamma,n,value,bound," << stamp_header << "\n";
        for (const auto& r : res.rows)
            if (r.table == table)
                os << r.gamma << "," << r.n << "," << r.value << "," << r.bound << "," << stamp(cfg) << "\n";
    }
    auto os = open_out(cfg, "slopes.csv");
    os << "table,gamma,slope,expected,constant," << stamp_header << "\n";
    for (const auto& s : res.slopes)
        os << s.table << "," << s.gamma << "," << s.slope << "," << s.expected << "," << s.constant << "," << stamp(cfg)
           << "\n";
    return 0;
}

int cmd_paths(const ExperimentConfig& cfg, std::int64_t r_hi, std::int64_t random_r, int cases) {
    auto j = to_json(audit_paths(3, r_hi, random_r, cases, cfg.seed));
    j["version"] = version();
    j["seed"] = cfg.seed;
    auto os = open_out(cfg, "paths_audit.json");
    os << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, std::vector<std::string> suites, const std::string& mutate,
               int hydro_replicas) {
    SuiteOptions opt;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    opt.hydro_replicas = hydro_replicas;
    opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
    if (mutate == "none") opt.mutation = RateMutation::none;
    else if (mutate == "negate_tilde_c") opt.mutation = RateMutation::negate_tilde_c;
    else if (mutate == "one_sided_tilde_c") opt.mutation = RateMutation::one_sided_tilde_c;
    else throw usage_error("unknown mutation: " + mutate);
    if (suites.empty()) suites = SuiteRunner::names();
    for (const auto& s : suites)
        if (std::find(SuiteRunner::names().begin(), SuiteRunner::names().end(), s) == SuiteRunner::names().end())
            throw usage_error("unknown suite: " + s);

    SuiteRunner runner(opt);
    nlohmann::json report = {{"version", version()}, {"seed", cfg.seed}, {"mutation", mutate}};
    nlohmann::json results = nlohmann::json::array();
    std::vector<std::string> failed;
    for (const auto& s : suites) {
        std::cerr << "suite " << s << "...\n";
        auto r = runner.run(s);
        if (!r.passed) failed.push_back(s);
        results.push_back(to_json(r));
    }
    report["suites"] = results;
    report["failed"] = failed;
    report["passed"] = failed.empty();
    auto os = open_out(cfg, "verify.json");
    os << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return failed.empty() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fractional porous medium particle system: simulation, PDE solver and checks"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    Common c_sim, c_solve, c_hydro, c_verify, c_tables, c_paths;
    auto* sim = app.add_subcommand("simulate", "run replicas and write trajectories as JSON lines");
    add_common(sim, c_sim);
    auto* solve = app.add_subcommand("solve", "solve the fractional porous medium equation, CSV {t,u,rho}");
    add_common(solve, c_solve);
    auto* hydro = app.add_subcommand("hydro", "particle system against the PDE on a panel of test functions");
    add_common(hydro, c_hydro);
    auto* verify = app.add_subcommand("verify", "run the acceptance suites, JSON report, exit 0 iff all pass");
    add_common(verify, c_verify);
    std::vector<std::string> suites;
    std::string mutate = "none";
    int hydro_replicas = 4096;
    verify->add_option("--suite", suites, "suite to run (repeatable; default all)");
    verify->add_option("--mutate", mutate, "rate corruption: none | negate_tilde_c | one_sided_tilde_c");
    verify->add_option("--hydro-replicas", hydro_replicas, "replicas for the hydrodynamic suites")
        ->check(CLI::Range(32, 1 << 20));
    auto* tables = app.add_subcommand("tables", "operator convergence tables with slopes");
    add_common(tables, c_tables);
    auto* paths = app.add_subcommand("paths-audit", "validate the moving-particle exchange paths");
    add_common(paths, c_paths);
    std::int64_t r_hi = 10, random_r = 100;
    int cases = 2000;
    paths->add_option("--r-max", r_hi, "largest r for the exhaustive check")->check(CLI::Range(3, 14));
    paths->add_option("--random-r-max", random_r, "largest r for random cases")->check(CLI::Range(3, 100000));
    paths->add_option("--cases", cases, "random cases")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*sim) return cmd_simulate(resolve(c_sim, "simulate"));
        if (*solve) return cmd_solve(resolve(c_solve, "solve"));
        if (*hydro) return cmd_hydro(resolve(c_hydro, "hydro"));
        if (*verify) return cmd_verify(resolve(c_verify, "verify"), suites, mutate, hydro_replicas);
        if (*tables) return cmd_tables(resolve(c_tables, "tables"));
        if (*paths) return cmd_paths(resolve(c_paths, "paths-audit"), r_hi, random_r, cases);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
