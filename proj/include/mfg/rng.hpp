#pragma once

#include <array>
#include <cstdint>

namespace mfg {

/// Philox4x32-10 counter-based generator. A block is a pure function of
/// (counter, key), so noise draws are independent of execution order and
/// reproducible across platforms and languages.
struct Philox4x32 {
    static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                         std::array<uint32_t, 2> key);
};

/// Monte Carlo noise layout shared by every simulator.
///
/// key     = (seed lo32, seed hi32)
/// counter = (replication, stream, node, pair index)
/// stream  = agent id for idiosyncratic noise, 0xffffffff for common noise.
///
/// Each block yields two uniforms u = ((w_a<<32 | w_b) >> 11 + 1) * 2^-53
/// and Box-Muller maps them to two standard normals; component c of a draw
/// uses pair index c/2 and picks the cos (even c) or sin (odd c) branch.
class NoiseGenerator {
  public:
    explicit NoiseGenerator(uint64_t seed) : seed_(seed) {}

    static constexpr uint32_t kCommonStream = 0xffffffffu;

    /// Standard normal for (replication, stream, node, component).
    double normal(uint32_t replication, uint32_t stream, uint32_t node,
                  uint32_t component) const;

    /// Uniform in [0, 1) for discrete sampling (tree branch draws).
    double uniform(uint32_t replication, uint32_t stream, uint32_t node,
                   uint32_t component) const;

    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_;
};

}  // namespace mfg
