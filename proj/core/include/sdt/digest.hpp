#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace sdt {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256, big-endian. Stable across builds and platforms.
std::uint64_t stable_hash64(std::string_view data);

/// Derives an independent stream seed from a base seed and a tuple of keys
/// (splitmix64 finalizer chained over the keys).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace sdt
