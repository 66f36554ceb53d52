#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "descent/error.hpp"
#include "descent/tensor.hpp"

namespace descent {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
// Uniform doubles take the top 53 bits; normals come from the trigonometric
// Box-Muller transform with the second draw of each pair cached. The whole
// pipeline is fixed so that a given (seed, draw sequence) reproduces
// bit-identical output on any conforming platform.
//
// Single-owner: one stream per run or thread, never shared.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = detail::splitmix64(s);
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1]; keeps log() finite in Box-Muller.
    double next_uniform_open() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal draw.
    double next_normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform_open();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Deterministic seed derivation for sub-streams (per-optimizer noise,
    // per-epoch shuffles, per-class sampling).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
        std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + b);
        std::uint64_t z = detail::splitmix64(s);
        return z ^ detail::splitmix64(s);
    }

private:
    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// I.i.d. draws from N(mean, std^2). std == 0 degenerates to a constant
// tensor and consumes nothing from the stream.
inline Tensor sample_normal(RngStream& rng, const Shape& shape, double mean, double std) {
    if (std < 0.0)
        throw Error("invalid-sigma", "sample_normal: std must be >= 0, got " + std::to_string(std));
    Tensor out(shape, mean);
    if (std == 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mean + std * rng.next_normal();
    return out;
}

// Fisher-Yates shuffle over an index vector, driven by the stream.
inline void shuffle_indices(RngStream& rng, std::vector<std::size_t>& indices) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(indices[i - 1], indices[j]);
    }
}

} // namespace descent
