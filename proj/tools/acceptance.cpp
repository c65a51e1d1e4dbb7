// Acceptance run: one PASS/FAIL line per criterion, tolerances from fpme::harness::tol.
//   acceptance [--seed S] [--threads K] [--hydro-replicas R] [--json FILE]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <fpme/harness/suites.hpp>

using namespace fpme::harness;

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    SuiteOptions opt;
    std::string json_path;
    app.add_option("--seed", opt.seed);
    app.add_option("--threads", opt.threads)->check(CLI::PositiveNumber);
    app.add_option("--hydro-replicas", opt.hydro_replicas)->check(CLI::Range(32, 1 << 20));
    app.add_option("--json", json_path, "also write the full report here");
    CLI11_PARSE(app, argc, argv);
    opt.log = [](const std::string& s) { std::cerr << "  " << s << "\n"; };

    SuiteRunner runner(opt);
    nlohmann::json all = nlohmann::json::array();
    int failed = 0, k = 0;
    for (const auto& name : SuiteRunner::names()) {
        ++k;
        auto r = runner.run(name);
        if (!r.passed) ++failed;
        std::printf("%-4s %2d %-14s %8.1fs  %s\n", r.passed ? "PASS" : "FAIL", k, name.c_str(), r.seconds,
                    r.detail.dump().c_str());
        std::fflush(stdout);
        all.push_back(to_json(r));
    }
    std::printf("%d of %d criteria passed\n", k - failed, k);
    if (!json_path.empty()) std::ofstream(json_path) << all.dump(2) << "\n";
    return failed == 0 ? 0 : 1;
}
