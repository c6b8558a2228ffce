#include "mfg/rng.hpp"

#include <cmath>

namespace mfg {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline uint32_t mulhi(uint32_t a, uint32_t b, uint32_t* lo) {
    uint64_t prod = static_cast<uint64_t>(a) * b;
    *lo = static_cast<uint32_t>(prod);
    return static_cast<uint32_t>(prod >> 32);
}

inline void philox_round(std::array<uint32_t, 4>& ctr,
                         const std::array<uint32_t, 2>& key) {
    uint32_t lo0, lo1;
    uint32_t hi0 = mulhi(kPhiloxM0, ctr[0], &lo0);
    uint32_t hi1 = mulhi(kPhiloxM1, ctr[2], &lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<uint32_t, 4> Philox4x32::block(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        philox_round(ctr, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

namespace {

// Two uniforms in (0, 1] from one block.
inline void block_uniforms(uint64_t seed, uint32_t rep, uint32_t stream,
                           uint32_t node, uint32_t pair, double* u1, double* u2) {
    std::array<uint32_t, 4> out = Philox4x32::block(
        {rep, stream, node, pair},
        {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)});
    uint64_t a = (static_cast<uint64_t>(out[0]) << 32) | out[1];
    uint64_t b = (static_cast<uint64_t>(out[2]) << 32) | out[3];
    *u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
    *u2 = static_cast<double>((b >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

double NoiseGenerator::normal(uint32_t replication, uint32_t stream,
                              uint32_t node, uint32_t component) const {
    double u1, u2;
    block_uniforms(seed_, replication, stream, node, component / 2, &u1, &u2);
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = kTwoPi * u2;
    return (component % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
}

double NoiseGenerator::uniform(uint32_t replication, uint32_t stream,
                               uint32_t node, uint32_t component) const {
    double u1, u2;
    block_uniforms(seed_, replication, stream, node, component / 2, &u1, &u2);
    double u = (component % 2 == 0) ? u1 : u2;
    return u - 0x1.0p-53;  // back to [0, 1)
}

}  // namespace mfg
