#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vehid {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Descriptor of an independent random stream. Identical (seed, stream_id)
/// pairs always yield identical draws.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    /// Derived stream for the k-th element of a batch.
    [[nodiscard]] RngStream child(std::uint64_t k) const noexcept
    {
        return {seed, detail::splitmix64(stream_id ^ detail::splitmix64(k + 1))};
    }

    /// Named sub-stream ("pilot", "round-2-sim", ...).
    [[nodiscard]] RngStream named(std::string_view name) const noexcept
    {
        return {seed, detail::splitmix64(stream_id ^ detail::fnv1a(name))};
    }

    [[nodiscard]] std::mt19937_64 engine() const
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        return std::mt19937_64(seq);
    }

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

using Engine = std::mt19937_64;

inline double uniform(Engine& eng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(eng);
}

/// Normal draw; a zero standard deviation returns the mean without consuming the engine.
inline double gaussian(Engine& eng, double mean, double std)
{
    if (!(std > 0.0)) return mean;
    return std::normal_distribution<double>(mean, std)(eng);
}

}  // namespace vehid
