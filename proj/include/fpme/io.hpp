#ifndef FPME_IO_HPP
#define FPME_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "lattice.hpp"
#include "simulator.hpp"

namespace fpme {

/**
 * Snapshot byte layout, all integers little-endian:
 *
 *   offset  size  field
 *   0       4     magic "FPMS"
 *   4       8     u64 N (sites)
 *   12      8     u64 seed
 *   20      8     f64 time (IEEE-754 bits as u64)
 *   28      8     u64 payload length L = ceil(N/8)
 *   36      L     occupancy, site i in byte i/8, bit i%8 (LSB first)
 */
struct Snapshot {
    Configuration eta;
    std::uint64_t seed = 0;
    double time = 0.0;
};

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t off) {
    if (off + 8 > in.size()) throw std::runtime_error("snapshot truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[off + i]) << (8 * i);
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> pack_bits(const Configuration& eta) {
    const std::int64_t N = eta.size();
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>((N + 7) / 8), 0);
    for (std::int64_t i = 0; i < N; ++i)
        if (eta[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return bytes;
}

inline Configuration unpack_bits(const std::uint8_t* bytes, std::size_t len, std::int64_t N) {
    if (len != static_cast<std::size_t>((N + 7) / 8)) throw std::runtime_error("packed length does not match N");
    Configuration eta(N);
    for (std::int64_t i = 0; i < N; ++i) eta.set(i, (bytes[i / 8] >> (i % 8)) & 1u);
    return eta;
}

inline std::vector<std::uint8_t> encode_snapshot(const Snapshot& s) {
    std::vector<std::uint8_t> out{'F', 'P', 'M', 'S'};
    detail::put_u64(out, static_cast<std::uint64_t>(s.eta.size()));
    detail::put_u64(out, s.seed);
    detail::put_u64(out, std::bit_cast<std::uint64_t>(s.time));
    auto bits = pack_bits(s.eta);
    detail::put_u64(out, bits.size());
    out.insert(out.end(), bits.begin(), bits.end());
    return out;
}

inline Snapshot decode_snapshot(const std::vector<std::uint8_t>& in) {
    if (in.size() < 36 || std::memcmp(in.data(), "FPMS", 4) != 0) throw std::runtime_error("bad snapshot magic");
    Snapshot s;
    auto N = static_cast<std::int64_t>(detail::get_u64(in, 4));
    s.seed = detail::get_u64(in, 12);
    s.time = std::bit_cast<double>(detail::get_u64(in, 20));
    std::uint64_t len = detail::get_u64(in, 28);
    if (36 + len != in.size()) throw std::runtime_error("snapshot payload length mismatch");
    s.eta = unpack_bits(in.data() + 36, len, N);
    return s;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
    std::string out(It(data.begin()), It(data.end()));
    out.append((3 - data.size() % 3) % 3, '=');
    return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string text) {
    using namespace boost::archive::iterators;
    while (!text.empty() && text.back() == '=') text.pop_back();
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    std::vector<std::uint8_t> out(It(text.begin()), It(text.end()));
    // transform_width can emit a trailing partial byte from the padding bits
    std::size_t bytes = text.size() * 6 / 8;
    out.resize(bytes);
    return out;
}

/// Writes a trajectory as JSON lines: a metadata header, then one record per snapshot.
/// Nothing timing-dependent is written, so equal seeds give equal bytes.
inline void write_trajectory_jsonl(std::ostream& os, const Trajectory& traj, const nlohmann::json& extra = {}) {
    const auto& p = traj.params;
    nlohmann::json head = {{"type", "header"},        {"n", p.n},
                           {"gamma", p.gamma},        {"T", p.T},
                           {"W", p.W},                {"N", p.ring_size()},
                           {"seed", p.seed},          {"event_count", traj.event_count},
                           {"proposal_count", traj.proposal_count}};
    if (extra.is_object())
        for (auto it = extra.begin(); it != extra.end(); ++it) head[it.key()] = it.value();
    os << head.dump() << '\n';
    for (const auto& [t, eta] : traj.snapshots) {
        nlohmann::json rec = {{"t", t},
                              {"n", p.n},
                              {"gamma", p.gamma},
                              {"seed", p.seed},
                              {"occupancy", base64_encode(pack_bits(eta))},
                              {"particle_count", eta.particle_count()}};
        os << rec.dump() << '\n';
    }
}

} // namespace fpme

#endif
