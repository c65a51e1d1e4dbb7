#ifndef FPME_HARNESS_CONFIG_HPP
#define FPME_HARNESS_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "../test_function.hpp"

#ifndef FPME_VERSION
#define FPME_VERSION "unknown"
#endif

namespace fpme::harness {

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const char* version() { return FPME_VERSION; }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

/**
 * Initial density profile g:
 *   constant: g = b
 *   step:     g = high on [-half_width, 0), low on [0, half_width), b elsewhere
 *   bump:     g = b + amplitude * phi(u / width)
 */
struct ProfileSpec {
    std::string kind = "constant";
    double b = 0.5;
    double high = 0.8;
    double low = 0.2;
    double half_width = 1.0;
    double amplitude = 0.3;
    double width = 1.0;

    double operator()(double u) const {
        if (kind == "constant") return b;
        if (kind == "step") {
            if (u >= -half_width && u < 0.0) return high;
            if (u >= 0.0 && u < half_width) return low;
            return b;
        }
        return b + amplitude * bump::value(u / width);
    }
    double min_value() const {
        if (kind == "step") return std::min({b, high, low});
        if (kind == "bump") return std::min(b, b + amplitude * std::exp(-1.0));
        return b;
    }
    double max_value() const {
        if (kind == "step") return std::max({b, high, low});
        if (kind == "bump") return std::max(b, b + amplitude * std::exp(-1.0));
        return b;
    }
};

struct PdeSpec {
    std::int64_t n_pde = 2048;
    int m = 2;
    double cfl = 0.5;
    std::string geometry = "line"; // "line" or "ring"; used by solve, hydro computes both
};

struct ExperimentConfig {
    std::string kind = "hydro";
    std::vector<double> gammas{1.0};
    std::vector<std::int64_t> ns{256, 512, 1024};
    int replicas = 32;
    std::uint64_t seed = 20240501;
    ProfileSpec profile;
    double T = 0.1;
    int record_points = 128; // snapshot grid intervals on [0, T]
    std::vector<double> report_times{0.0, 0.1};
    double W = 8.0;
    double eps = 0.1;
    PdeSpec pde;
    std::string out_dir = "out";
    unsigned threads = 1;
    bool allow_extreme_profile = false;

    void validate() const {
        static const std::vector<std::string> kinds{"hydro", "simulate", "solve", "tables", "verify", "paths-audit"};
        if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) throw usage_error("unknown experiment kind: " + kind);
        if (gammas.empty()) throw usage_error("gamma list is empty");
        for (double g : gammas)
            if (!(g > 0.0 && g < 2.0)) throw usage_error("gamma must lie in (0,2)");
        if (ns.empty()) throw usage_error("n list is empty");
        for (auto n : ns) {
            if (n < 1) throw usage_error("n must be positive");
            if (kind == "hydro" && n < 64) throw usage_error("hydrodynamic runs need n >= 64");
        }
        if (replicas < 1) throw usage_error("replicas must be positive");
        if (kind == "hydro" && replicas < 32) throw usage_error("hydrodynamic runs need at least 32 replicas");
        if (!(T > 0.0)) throw usage_error("T must be positive");
        if (record_points < 1) throw usage_error("record_points must be positive");
        for (double t : report_times)
            if (t < 0.0 || t > T) throw usage_error("report times must lie in [0, T]");
        static const std::vector<std::string> pk{"constant", "step", "bump"};
        if (std::find(pk.begin(), pk.end(), profile.kind) == pk.end())
            throw usage_error("unknown profile kind: " + profile.kind);
        if (profile.min_value() < 0.0 || profile.max_value() > 1.0) throw usage_error("profile leaves [0,1]");
        if (!allow_extreme_profile && (profile.min_value() <= 0.0 || profile.max_value() >= 1.0))
            throw usage_error("profile touches 0 or 1; set allow_extreme_profile to run it anyway");
        if (!(profile.b > 0.0 && profile.b < 1.0)) throw usage_error("b must lie in (0,1)");
        if (!(W > 0.0)) throw usage_error("W must be positive");
        if (kind == "hydro")
            for (double g : gammas)
                for (auto n : ns)
                    if (eps * std::pow(static_cast<double>(n), g / 2.0) < 1.0)
                        throw usage_error("eps n^{gamma/2} is below 1 for n=" + std::to_string(n) +
                                          "; raise eps or n");
        if (pde.m < 1) throw usage_error("pde.m must be >= 1");
        if (pde.geometry != "line" && pde.geometry != "ring")
            throw usage_error("pde.geometry must be line or ring");
    }

    /// Record grid with the report times merged in.
    std::vector<double> record_grid() const {
        std::vector<double> g;
        for (int i = 0; i <= record_points; ++i) g.push_back(T * i / record_points);
        for (double t : report_times) g.push_back(t);
        std::sort(g.begin(), g.end());
        std::vector<double> out;
        for (double t : g)
            if (out.empty() || t - out.back() > 1e-12 * std::max(1.0, T)) out.push_back(t);
            else out.back() = std::max(out.back(), t);
        // keep report times exact
        for (double& t : out)
            for (double r : report_times)
                if (std::abs(t - r) <= 1e-12 * std::max(1.0, T)) t = r;
        return out;
    }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"kind", c.kind},
            {"gamma", c.gammas},
            {"n", c.ns},
            {"replicas", c.replicas},
            {"seed", c.seed},
            {"profile",
             {{"kind", c.profile.kind},
              {"b", c.profile.b},
              {"high", c.profile.high},
              {"low", c.profile.low},
              {"half_width", c.profile.half_width},
              {"amplitude", c.profile.amplitude},
              {"width", c.profile.width}}},
            {"T", c.T},
            {"record_points", c.record_points},
            {"report_times", c.report_times},
            {"W", c.W},
            {"eps", c.eps},
            {"pde", {{"n_pde", c.pde.n_pde}, {"m", c.pde.m}, {"cfl", c.pde.cfl}, {"geometry", c.pde.geometry}}},
            {"allow_extreme_profile", c.allow_extreme_profile}};
}

/// Reads keys present in j over the defaults; unknown keys are a usage error.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
    static const std::vector<std::string> known{"kind",  "gamma",         "n",     "replicas", "seed",
                                                "profile", "T",           "record_points", "report_times",
                                                "W",     "eps",           "pde",   "out",      "threads",
                                                "allow_extreme_profile"};
    if (!j.is_object()) throw usage_error("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw usage_error("unknown config key: " + it.key());
    try {
        if (j.contains("kind")) c.kind = j["kind"].get<std::string>();
        if (j.contains("gamma")) c.gammas = j["gamma"].get<std::vector<double>>();
        if (j.contains("n")) c.ns = j["n"].get<std::vector<std::int64_t>>();
        if (j.contains("replicas")) c.replicas = j["replicas"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("T")) c.T = j["T"].get<double>();
        if (j.contains("record_points")) c.record_points = j["record_points"].get<int>();
        if (j.contains("report_times")) c.report_times = j["report_times"].get<std::vector<double>>();
        if (j.contains("W")) c.W = j["W"].get<double>();
        if (j.contains("eps")) c.eps = j["eps"].get<double>();
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
        if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
        if (j.contains("allow_extreme_profile")) c.allow_extreme_profile = j["allow_extreme_profile"].get<bool>();
        if (j.contains("profile")) {
            const auto& p = j["profile"];
            if (p.contains("kind")) c.profile.kind = p["kind"].get<std::string>();
            if (p.contains("b")) c.profile.b = p["b"].get<double>();
            if (p.contains("high")) c.profile.high = p["high"].get<double>();
            if (p.contains("low")) c.profile.low = p["low"].get<double>();
            if (p.contains("half_width")) c.profile.half_width = p["half_width"].get<double>();
            if (p.contains("amplitude")) c.profile.amplitude = p["amplitude"].get<double>();
            if (p.contains("width")) c.profile.width = p["width"].get<double>();
        }
        if (j.contains("pde")) {
            const auto& p = j["pde"];
            if (p.contains("n_pde")) c.pde.n_pde = p["n_pde"].get<std::int64_t>();
            if (p.contains("m")) c.pde.m = p["m"].get<int>();
            if (p.contains("cfl")) c.pde.cfl = p["cfl"].get<double>();
            if (p.contains("geometry")) c.pde.geometry = p["geometry"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw usage_error(std::string("bad config value: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig defaults = {}) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw usage_error(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j, std::move(defaults));
}

/// Hash of the canonical JSON form (keys sorted); output location and thread count excluded.
inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

} // namespace fpme::harness

#endif
