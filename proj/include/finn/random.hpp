#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace finn::rng {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A keyed bijection of a 128-bit counter; every draw is addressed by its
// counter, so streams are reproducible irrespective of evaluation order.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// Independent purposes draw from disjoint counter spaces.
enum class Stream : std::uint32_t {
    path_shocks = 1,
    augmentation = 2,
    init = 3,
    shuffle = 4,
};

/// Seed-keyed, counter-addressed generator. Each (major, minor) address
/// yields 128 random bits; typically major = step, minor = path.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(static_cast<std::uint32_t>(stream)) {}

    std::array<std::uint32_t, 4> bits(std::uint64_t major, std::uint32_t minor) const {
        return philox4x32({static_cast<std::uint32_t>(major),
                           static_cast<std::uint32_t>(major >> 32), minor, stream_},
                          key_);
    }

    /// Two uniforms strictly inside (0, 1), 53 bits each.
    std::array<double, 2> uniforms(std::uint64_t major, std::uint32_t minor) const {
        const auto b = bits(major, minor);
        return {to_unit((static_cast<std::uint64_t>(b[0]) << 32) | b[1]),
                to_unit((static_cast<std::uint64_t>(b[2]) << 32) | b[3])};
    }

    /// Two independent standard normals (Box-Muller).
    std::array<double, 2> normals(std::uint64_t major, std::uint32_t minor) const {
        const auto [u1, u2] = uniforms(major, minor);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    static double to_unit(std::uint64_t x) {
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_;
};

}  // namespace finn::rng
