#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace sg {

// Philox4x32-10 (Salmon et al. 2011). Stateless: output depends only on (counter, key).
struct Philox {
    using ctr_t = std::array<std::uint32_t, 4>;
    using key_t = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;

    static inline void round(ctr_t& c, const key_t& k) {
        std::uint64_t p0 = std::uint64_t(M0) * c[0];
        std::uint64_t p1 = std::uint64_t(M1) * c[2];
        ctr_t o{std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
                std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
        c = o;
    }

    static inline ctr_t eval(ctr_t c, key_t k) {
        for (int r = 0; r < 10; ++r) {
            if (r) { k[0] += W0; k[1] += W1; }
            round(c, k);
        }
        return c;
    }
};

// Counter layout used throughout: (mode, knot, trajectory lo/hi), keyed by the 64-bit master seed.
inline Philox::key_t philox_key(std::uint64_t seed) {
    return {std::uint32_t(seed), std::uint32_t(seed >> 32)};
}

inline double u53(std::uint32_t hi, std::uint32_t lo) {
    // (0,1], never zero so log() is safe
    std::uint64_t v = (std::uint64_t(hi) << 21) ^ (std::uint64_t(lo) >> 11);
    v &= (std::uint64_t(1) << 53) - 1;
    return (double(v) + 1.0) * 0x1.0p-53;
}

// Two independent standard normals from one Philox block (Box-Muller).
inline std::pair<double, double> normal_pair(std::uint32_t mode, std::uint32_t knot,
                                             std::uint64_t traj, const Philox::key_t& key) {
    auto r = Philox::eval({mode, knot, std::uint32_t(traj), std::uint32_t(traj >> 32)}, key);
    double u1 = u53(r[0], r[1]), u2 = u53(r[2], r[3]);
    double rad = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(th), rad * std::sin(th)};
}

}  // namespace sg
