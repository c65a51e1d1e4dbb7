// Particle system against the PDE for one test function.
//   small_run [gamma] [n] [replicas]
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <fpme/lattice.hpp>
#include <fpme/pde.hpp>
#include <fpme/simulator.hpp>

using namespace fpme;

int main(int argc, char** argv) {
    const double gamma = argc > 1 ? std::atof(argv[1]) : 1.0;
    const std::int64_t n = argc > 2 ? std::atoll(argv[2]) : 128;
    const int replicas = argc > 3 ? std::atoi(argv[3]) : 64;
    const double T = 0.1, W = 8.0, b = 0.5;

    const auto bumpfn = TestFunction::make_bump(1.0);
    auto g = [&](double u) { return b + 0.3 * std::exp(1.0) * bumpfn.profile(u); };
    const auto G = TestFunction::make_shifted(0.5, 0.5);

    PdeParams pp;
    pp.gamma = gamma;
    pp.b = b;
    pp.W = W;
    pp.n_pde = 512;
    pp.T = T;
    pp.record_times = uniform_grid(T, 4);
    pp.geometry = Geometry::ring; // same periodic window and jump cut-off as the particles
    auto pde = integrate(g, pp);

    SimParams sp;
    sp.n = n;
    sp.gamma = gamma;
    sp.T = T;
    sp.W = W;
    sp.record_times = pp.record_times;
    const std::int64_t N = sp.ring_size();
    ProductMeasure mu;
    for (std::int64_t i = 0; i < N; ++i) mu.profile.push_back(g(static_cast<double>(site_coordinate(i, N)) / n));

    std::vector<double> mean(sp.record_times.size(), 0.0);
    for (int r = 0; r < replicas; ++r) {
        Rng rng(replica_seed(1, 2 * r));
        sp.seed = replica_seed(1, 2 * r + 1);
        auto tr = run(sample_configuration(mu, rng), sp);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += profile_pairing(tr.snapshots[k].second, G, n) / replicas;
    }

    std::printf("gamma=%.2f n=%lld N=%lld replicas=%d\n", gamma, static_cast<long long>(n),
                static_cast<long long>(N), replicas);
    std::printf("%8s %14s %14s\n", "t", "particles", "pde");
    for (std::size_t k = 0; k < mean.size(); ++k) {
        const auto& f = pde.frames[k];
        double ref = 0.0;
        for (std::size_t i = 0; i < f.values.size(); ++i) ref += f.values[i] * G.profile(f.u(static_cast<std::int64_t>(i)));
        ref *= pp.h();
        std::printf("%8.4f %14.6f %14.6f\n", f.time, mean[k], ref);
    }
}
