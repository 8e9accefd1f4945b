#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace thinkgrid {

// Counter-based splittable RNG. Every random decision in the system is a pure
// function of (master seed, substream path, counter), so any stage of a run
// can be reproduced independently: re-deriving the same key yields the same
// draws regardless of what other streams consumed in between.

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x00000100000001b3ull;
    }
    return h;
}

} // namespace detail

// Derives a child stream key. Chains of derive() calls form the substream
// path (e.g. seed -> "env" -> row -> step).
constexpr std::uint64_t derive_stream(std::uint64_t key, std::uint64_t child) noexcept {
    return detail::mix64(key + detail::kGolden * (child + 1));
}

constexpr std::uint64_t derive_stream(std::uint64_t key, std::string_view name) noexcept {
    return derive_stream(key, detail::fnv1a(name));
}

// Sequential draws from one stream key (splitmix64 walk).
class RngStream {
public:
    RngStream() = default;
    constexpr explicit RngStream(std::uint64_t key) noexcept : state_(key) {}

    constexpr std::uint64_t next_u64() noexcept {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    constexpr double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Multiply-shift; bias is < n / 2^64.
    constexpr std::uint32_t next_below(std::uint32_t n) noexcept {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Marsaglia polar would need rejection; Box-Muller keeps the draw count
    // fixed at two per call, which the replay protocol relies on.
    double next_gaussian() noexcept {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_ = 0;
};

} // namespace thinkgrid
