#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>

#include "soo/error.hpp"
#include "soo/linalg.hpp"

namespace soo {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/**
 * Deterministic random stream: xoshiro256** seeded by splitmix64 from a mix
 * of (master seed, stream id).
 *
 * Stream derivation is a pure function, so run i of an experiment always
 * owns stream i no matter which thread executes it. A stream is single-owner
 * and must not be shared between threads.
 */
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id) : stream_id_(stream_id) {
        std::uint64_t sm = stream_id ^ 0x632BE59BD9B4E019ULL;
        std::uint64_t mixed = master_seed ^ detail::splitmix64(sm);
        for (auto& word : s_) word = detail::splitmix64(mixed);
    }

    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_low() noexcept { return 1.0 - uniform(); }

    /// Standard normal via Box-Muller; the second variate of each pair is
    /// cached and returned by the next call.
    double gaussian() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open_low()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    std::array<std::uint64_t, 4> s_{};
    std::uint64_t stream_id_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Vector sample_gaussian(RngStream& stream, std::size_t n) {
    Vector out(n);
    for (auto& v : out) v = stream.gaussian();
    return out;
}

/// Fills `out` with a direction uniform on the unit sphere (normalized Gaussian).
inline void sample_sphere_into(RngStream& stream, std::span<double> out) {
    for (;;) {
        double ss = 0.0;
        for (auto& v : out) {
            v = stream.gaussian();
            ss += v * v;
        }
        const double n = std::sqrt(ss);
        if (n < 1e-300) continue;
        const double inv = 1.0 / n;
        for (auto& v : out) v *= inv;
        return;
    }
}

inline Vector sample_sphere(RngStream& stream, std::size_t d) {
    if (d == 0) throw InvalidArgument("sample_sphere: dimension must be at least 1");
    Vector out(d);
    sample_sphere_into(stream, out);
    return out;
}

enum class NoiseKind { SphereUniform, BallUniform };

/// Spherically symmetric bounded noise: uniform on the sphere or in the ball
/// of the given radius.
struct NoiseModel {
    NoiseKind kind = NoiseKind::SphereUniform;
    double radius = 1.0;
    std::size_t dim = 2;

    static NoiseModel sphere(std::size_t d, double r) { return NoiseModel{NoiseKind::SphereUniform, r, d}; }
    static NoiseModel ball(std::size_t d, double r) { return NoiseModel{NoiseKind::BallUniform, r, d}; }

    void validate() const {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw InvalidArgument("noise radius must be positive and finite, got " + std::to_string(radius));
        if (dim < 2) throw InvalidArgument("noise dimension must be at least 2, got " + std::to_string(dim));
    }
};

inline const char* to_string(NoiseKind k) noexcept {
    return k == NoiseKind::SphereUniform ? "sphere" : "ball";
}

inline void sample_noise_into(RngStream& stream, const NoiseModel& model, std::span<double> out) {
    sample_sphere_into(stream, out);
    double scale = model.radius;
    if (model.kind == NoiseKind::BallUniform)
        scale *= std::pow(stream.uniform_open_low(), 1.0 / static_cast<double>(model.dim));
    for (auto& v : out) v *= scale;
}

inline Vector sample_noise(RngStream& stream, const NoiseModel& model) {
    Vector out(model.dim);
    sample_noise_into(stream, model, out);
    return out;
}

}  // namespace soo
