#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dtstop {

/// Purpose tags mixed into substream seeds so that independent consumers of
/// the master seed never share a stream.
enum class StreamPurpose : std::uint64_t {
    skeleton = 0x736b656cULL,
    fresh = 0x66726573ULL,
    oracle_check = 0x6f726163ULL,
    validation = 0x76616c69ULL,
    probe = 0x70726f62ULL,
    coupling = 0x636f7570ULL,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of substream (seed, purpose, index). Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose, std::uint64_t index) noexcept;

/// Deterministic random stream. Uniforms are produced from the top 53 bits of
/// the engine output so the mapping is identical on every standard library.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}
    Stream(std::uint64_t master, StreamPurpose purpose, std::uint64_t index)
        : engine_(derive_seed(master, purpose, index)) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Fair +1/-1.
    int sign() { return (engine_() >> 63) != 0 ? 1 : -1; }

    /// Standard normal by Box-Muller (two uniforms per draw, no cached pair).
    double normal() {
        const double u = uniform();
        const double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dtstop
