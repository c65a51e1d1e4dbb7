#ifndef FPME_PATHS_HPP
#define FPME_PATHS_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lattice.hpp"

namespace fpme {

class path_invalid : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Bond = std::pair<std::int64_t, std::int64_t>;

struct ExchangePath {
    std::vector<Bond> steps;
    std::string required_support;
    std::int64_t nn_prefix = 0; // nearest-neighbour relocation steps before the core path
    std::int64_t nn_suffix = 0; // and after it
};

struct Midpoint {
    std::int64_t z0, z1, z2;
};

/// m = r/2 for even r, (r+1)/2 for odd r.
inline std::int64_t half_index(std::int64_t r) {
    if (r <= 0) throw std::domain_error("r must be positive");
    return r % 2 == 0 ? r / 2 : (r + 1) / 2;
}

/// Intermediate sites z_{1j}, j = 1..m, for the bond {x, x+r}.
inline std::vector<Midpoint> midpoint_sites(std::int64_t x, std::int64_t r) {
    std::int64_t m = half_index(r);
    std::vector<Midpoint> out;
    out.reserve(static_cast<std::size_t>(m));
    for (std::int64_t j = 1; j <= m; ++j) {
        std::int64_t z1 = r % 2 == 0 ? x + m + j : x + m - 1 + j;
        out.push_back({x, z1, x + r});
    }
    return out;
}

/// Nonzero hop lengths |z1-z0|, |z2-z1| over j, with zero-length hops dropped.
inline std::vector<std::int64_t> gap_multiset(std::int64_t r) {
    std::vector<std::int64_t> g;
    for (const auto& z : midpoint_sites(0, r)) {
        g.push_back(z.z1 - z.z0);
        if (z.z2 != z.z1) g.push_back(z.z2 - z.z1);
    }
    return g;
}

inline bool gaps_distinct(std::int64_t r) {
    auto g = gap_multiset(r);
    std::sort(g.begin(), g.end());
    return std::adjacent_find(g.begin(), g.end()) == g.end();
}

/// True when the auxiliary sites z1-1, z1-2 collide with x, which breaks the six-step scheme.
inline bool mpl_degenerate(std::int64_t r, std::int64_t j) {
    auto z = midpoint_sites(0, r).at(static_cast<std::size_t>(j - 1));
    return z.z1 - z.z0 <= 2;
}

/**
 * Six-exchange path for the bond {x, x+r} through z1 = z_{1j}. The particles at
 * x-1, x-2 are parked at z1-1, z1-2, the two principal hops are made, and the
 * parked particles are returned. Principal order: (x,z1) then (z1,z2) when
 * eta(x) != eta(z1), reversed when eta(x) == eta(z1). No principal hops when
 * eta(x) = eta(x+r).
 */
inline ExchangePath mpl_path(const Configuration& eta, std::int64_t x, std::int64_t r, std::int64_t j) {
    std::int64_t m = half_index(r);
    if (j < 1 || j > m) throw std::domain_error("j must lie in 1..m");
    if (mpl_degenerate(r, j))
        throw path_invalid("auxiliary sites coincide with x for r=" + std::to_string(r) + ", j=" + std::to_string(j));
    if (!(eta[x - 2] == 1 && eta[x - 1] == 1)) throw path_invalid("support eta(x-2) = eta(x-1) = 1 not satisfied");
    auto z = midpoint_sites(x, r)[static_cast<std::size_t>(j - 1)];

    ExchangePath p;
    p.required_support = "eta(x-2)=eta(x-1)=1";
    p.steps.push_back({z.z0 - 1, z.z1 - 1});
    p.steps.push_back({z.z0 - 2, z.z1 - 2});
    // eta(x) = eta(x+r): the target is eta itself, and two hops would permute
    // x, z1, z2 cyclically, so the principal hops are left out
    if (eta[z.z0] != eta[z.z2]) {
        Bond first{z.z0, z.z1}, second{z.z1, z.z2};
        if (eta[z.z0] == eta[z.z1]) std::swap(first, second);
        for (const Bond& b : {first, second})
            if (b.first != b.second) p.steps.push_back(b); // zero-length hop when z1 = x+r
    }
    p.steps.push_back({z.z0 - 1, z.z1 - 1});
    p.steps.push_back({z.z0 - 2, z.z1 - 2});
    return p;
}

struct PathReport {
    Configuration final_state;
    bool all_steps_allowed = true; // every step that moves a particle has tilde_c >= 1
    std::int64_t moving_steps = 0;
    std::int64_t max_jump = 0;
};

/// Applies the steps in order and records whether each non-trivial exchange had tilde_c >= 1.
inline PathReport apply_path(const Configuration& eta, const ExchangePath& path) {
    PathReport rep;
    rep.final_state = eta;
    auto& cur = rep.final_state;
    for (const auto& [a, b] : path.steps) {
        rep.max_jump = std::max<std::int64_t>(rep.max_jump, std::llabs(b - a));
        if (xi(cur, a, b) == 0) continue;
        ++rep.moving_steps;
        if (tilde_c(cur, a, b) < 1) rep.all_steps_allowed = false;
        cur.swap_sites(a, b);
    }
    return rep;
}

struct MultiplicityReport {
    std::int64_t literal_max = 0;    // max over bonds of total occurrences
    std::int64_t per_family_max = 0; // max occurrences of a bond within one of the four bond families
};

/**
 * Counts the four bonds {x-1,z1-1}, {x-2,z1-2}, {x,z1}, {z1,z2} over x in
 * [x_lo, x_hi] and j = 1..m (zero-length bonds skipped).
 */
inline MultiplicityReport bond_multiplicity(std::int64_t x_lo, std::int64_t x_hi, std::int64_t r) {
    std::map<Bond, std::int64_t> total;
    std::map<std::pair<int, Bond>, std::int64_t> family;
    for (std::int64_t x = x_lo; x <= x_hi; ++x) {
        for (const auto& z : midpoint_sites(x, r)) {
            Bond b[4] = {{z.z0 - 1, z.z1 - 1}, {z.z0 - 2, z.z1 - 2}, {z.z0, z.z1}, {z.z1, z.z2}};
            for (int f = 0; f < 4; ++f) {
                if (b[f].first == b[f].second) continue;
                Bond key = std::minmax(b[f].first, b[f].second);
                ++total[key];
                ++family[{f, key}];
            }
        }
    }
    MultiplicityReport rep;
    for (const auto& [k, v] : total) rep.literal_max = std::max(rep.literal_max, v);
    for (const auto& [k, v] : family) rep.per_family_max = std::max(rep.per_family_max, v);
    return rep;
}

/**
 * Path exchanging {x+1, x+1+r}: nearest-neighbour moves bring the two rightmost
 * particles of {x-ell, ..., x} to x and x-1, then the six-step path for the
 * bond {x+1, x+1+r} (intermediate index j, default m), then the moves undone.
 */
inline ExchangePath relocation_path(const Configuration& eta, std::int64_t x, std::int64_t r, std::int64_t ell,
                                    std::int64_t j = 0) {
    if (ell < 1) throw std::domain_error("ell must be >= 1");
    std::int64_t count = 0;
    for (std::int64_t y = x - ell; y <= x - 1; ++y) count += eta[y];
    if (count < 2) throw path_invalid("fewer than two particles in {x-ell, ..., x-1}");
    if (j == 0) j = half_index(r);

    std::int64_t p1 = x, p2 = 0;
    while (eta[p1] == 0) --p1;
    p2 = p1 - 1;
    while (eta[p2] == 0) --p2;

    ExchangePath out;
    out.required_support = "at least two particles in {x-ell,...,x-1}";
    std::vector<Bond> moves;
    for (std::int64_t s = p1; s < x; ++s) moves.push_back({s, s + 1});
    for (std::int64_t s = p2; s < x - 1; ++s) moves.push_back({s, s + 1});

    Configuration mid = eta;
    for (const auto& [a, b] : moves) mid.swap_sites(a, b);
    ExchangePath core = mpl_path(mid, x + 1, r, j);

    out.steps = moves;
    out.steps.insert(out.steps.end(), core.steps.begin(), core.steps.end());
    for (auto it = moves.rbegin(); it != moves.rend(); ++it) out.steps.push_back(*it);
    out.nn_prefix = out.nn_suffix = static_cast<std::int64_t>(moves.size());
    return out;
}

inline nlohmann::json to_json(const ExchangePath& p) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& [a, b] : p.steps) steps.push_back({a, b});
    return {{"steps", steps},
            {"required_support", p.required_support},
            {"nn_prefix", p.nn_prefix},
            {"nn_suffix", p.nn_suffix}};
}

} // namespace fpme

#endif
