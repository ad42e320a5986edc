#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dispatchsim {

// 64-bit mixers used for seed derivation. mt19937_64 supplies the streams
// themselves; the mixers only spread user seeds / stream names over the
// seed space. Both are bit-portable.
inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

// One named sub-stream. Draws are deterministic across platforms: the
// engine is standard-mandated and the uniform mappings below avoid
// implementation-defined std:: distributions.
class Substream {
public:
    explicit Substream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1), 53-bit resolution
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // [low, high); degenerate bounds return low
    double uniform(double low, double high) {
        return low + uniform01() * (high - low);
    }

    // inclusive on both ends
    int uniform_int(int low, int high) {
        return low + static_cast<int>(uniform01() * static_cast<double>(high - low + 1));
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
};

// Splits one replication root seed into independent named sub-streams
// (arrivals, processing, duedates, weights, disturbances, lags, overrides,
// policy-ties). Streams are derived by name so draw counts in one stream
// never shift another.
class StreamFactory {
public:
    explicit StreamFactory(std::uint64_t root) : root_(root) {}

    Substream stream(std::string_view name) const {
        std::uint64_t s = root_ ^ fnv1a64(name);
        return Substream(splitmix64(s));
    }

    std::uint64_t root() const { return root_; }

    // Root seed for replication `rep` of a scenario seeded with `base_seed`.
    static std::uint64_t replication_root(std::uint64_t base_seed, int rep) {
        std::uint64_t s = base_seed;
        std::uint64_t mixed = splitmix64(s);
        s = mixed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(rep) + 1));
        return splitmix64(s);
    }

private:
    std::uint64_t root_;
};

} // namespace dispatchsim
