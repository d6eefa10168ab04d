#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace dcm::hashing {

struct hash128 {
  std::uint64_t h1;
  std::uint64_t h2;

  friend bool operator==(const hash128&, const hash128&) = default;
};

namespace detail {

constexpr std::uint64_t rotl64(std::uint64_t x, int r) noexcept { return (x << r) | (x >> (64 - r)); }

constexpr std::uint64_t fmix64(std::uint64_t k) noexcept {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

inline std::uint64_t load_le64(const std::byte* p) noexcept {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint64_t>(p[i]);
  return v;
}

}  // namespace detail

// MurmurHash3 x64_128 with the 32-bit seed widened to 64 bits. For seeds below 2^32 the output
// matches the reference implementation bit for bit.
inline hash128 murmur3_128(std::span<const std::byte> data, std::uint64_t seed) noexcept {
  using detail::rotl64;
  constexpr std::uint64_t c1 = 0x87c37b91114253d5ULL;
  constexpr std::uint64_t c2 = 0x4cf5ad432745937fULL;

  const std::size_t len = data.size();
  const std::size_t nblocks = len / 16;
  std::uint64_t h1 = seed;
  std::uint64_t h2 = seed;

  const std::byte* p = data.data();
  for (std::size_t i = 0; i < nblocks; ++i) {
    std::uint64_t k1 = detail::load_le64(p + i * 16);
    std::uint64_t k2 = detail::load_le64(p + i * 16 + 8);

    k1 *= c1;
    k1 = rotl64(k1, 31);
    k1 *= c2;
    h1 ^= k1;
    h1 = rotl64(h1, 27);
    h1 += h2;
    h1 = h1 * 5 + 0x52dce729;

    k2 *= c2;
    k2 = rotl64(k2, 33);
    k2 *= c1;
    h2 ^= k2;
    h2 = rotl64(h2, 31);
    h2 += h1;
    h2 = h2 * 5 + 0x38495ab5;
  }

  const std::byte* tail = p + nblocks * 16;
  std::uint64_t k1 = 0;
  std::uint64_t k2 = 0;
  const std::size_t rem = len & 15;
  for (std::size_t i = rem; i > 8; --i) k2 ^= static_cast<std::uint64_t>(tail[i - 1]) << ((i - 9) * 8);
  if (rem > 8) {
    k2 *= c2;
    k2 = rotl64(k2, 33);
    k2 *= c1;
    h2 ^= k2;
  }
  for (std::size_t i = rem < 8 ? rem : 8; i > 0; --i) k1 ^= static_cast<std::uint64_t>(tail[i - 1]) << ((i - 1) * 8);
  if (rem > 0) {
    k1 *= c1;
    k1 = rotl64(k1, 31);
    k1 *= c2;
    h1 ^= k1;
  }

  h1 ^= len;
  h2 ^= len;
  h1 += h2;
  h2 += h1;
  h1 = detail::fmix64(h1);
  h2 = detail::fmix64(h2);
  h1 += h2;
  h2 += h1;
  return {h1, h2};
}

inline hash128 murmur3_128(const void* data, std::size_t len, std::uint64_t seed) noexcept {
  return murmur3_128(std::span<const std::byte>(static_cast<const std::byte*>(data), len), seed);
}

// Derives independent sub-seeds (per switch, per filter, per sketch row) from one base seed.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) noexcept {
  return detail::fmix64(base ^ detail::fmix64(salt + 0x9e3779b97f4a7c15ULL));
}

}  // namespace dcm::hashing
