#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"

namespace dcm {

/// False-positive probability of a Bloom filter holding n items in m bits with k hash functions,
/// (1 - e^{-kn/m})^k.
inline double bf_fp_rate(std::uint64_t n, std::uint64_t m, std::uint64_t k) {
  if (m == 0) throw error(errc::invalid_parameter, "bloom filter length must be >= 1 bit");
  if (k == 0) throw error(errc::invalid_parameter, "bloom filter needs >= 1 hash function");
  if (n == 0) return 0.0;
  const double exponent = -static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(m);
  return std::pow(-std::expm1(exponent), static_cast<double>(k));
}

struct BloomSize {
  std::uint64_t m_bits;
  unsigned k;

  friend bool operator==(const BloomSize&, const BloomSize&) = default;
};

/// Optimal sizing: m = ceil(-n ln p / (ln 2)^2), k = max(1, round((m/n) ln 2)).
inline BloomSize bf_size_for(std::uint64_t n, double target_fp) {
  if (!(target_fp > 0.0 && target_fp < 1.0)) throw error(errc::invalid_parameter, "target fp must lie in (0, 1)");
  if (n == 0) throw error(errc::invalid_parameter, "bloom filter sizing needs n >= 1");
  const double ln2 = std::log(2.0);
  const double nd = static_cast<double>(n);
  const auto m = static_cast<std::uint64_t>(std::ceil(-nd * std::log(target_fp) / (ln2 * ln2)));
  const auto k = static_cast<unsigned>(std::max(1.0, std::round(static_cast<double>(m) / nd * ln2)));
  return {std::max<std::uint64_t>(m, 1), k};
}

/// Hash count minimizing the false-positive rate for a fixed bit budget, capped to keep lookups cheap.
inline unsigned bf_optimal_k(std::uint64_t m_bits, std::uint64_t n, unsigned cap = 16) {
  if (n == 0) return 1;
  const double k = std::round(static_cast<double>(m_bits) / static_cast<double>(n) * std::log(2.0));
  return static_cast<unsigned>(std::clamp(k, 1.0, static_cast<double>(cap)));
}

class BloomFilter {
public:
  static constexpr std::uint8_t format_version = 1;
  static constexpr std::size_t header_size = 4 + 1 + 8 + 1 + 8 + 8;

  BloomFilter(std::uint64_t m_bits, unsigned k, std::uint64_t seed) : m_(m_bits), k_(k), seed_(seed) {
    if (m_bits == 0) throw error(errc::invalid_parameter, "bloom filter length must be >= 1 bit");
    if (k == 0 || k > 255) throw error(errc::invalid_parameter, "hash count must lie in [1, 255]");
    words_.assign((m_bits + 63) / 64, 0);
  }

  static BloomFilter sized_for(std::uint64_t n, double target_fp, std::uint64_t seed) {
    const auto s = bf_size_for(n, target_fp);
    return BloomFilter(s.m_bits, s.k, seed);
  }

  void insert(std::span<const std::byte> key) {
    const auto h = hashing::murmur3_128(key, seed_);
    for (unsigned i = 0; i < k_; ++i) set_bit(index(h, i));
    ++inserted_;
  }
  void insert(const FlowKey& flow) {
    const auto b = flow.bytes();
    insert(std::span<const std::byte>(b));
  }

  [[nodiscard]] bool contains(std::span<const std::byte> key) const {
    const auto h = hashing::murmur3_128(key, seed_);
    for (unsigned i = 0; i < k_; ++i) {
      if (!test_bit(index(h, i))) return false;
    }
    return true;
  }
  [[nodiscard]] bool contains(const FlowKey& flow) const {
    const auto b = flow.bytes();
    return contains(std::span<const std::byte>(b));
  }

  [[nodiscard]] std::uint64_t bit_size() const noexcept { return m_; }
  [[nodiscard]] std::uint64_t byte_size() const noexcept { return (m_ + 7) / 8; }
  [[nodiscard]] unsigned hash_count() const noexcept { return k_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  // Counts insert calls, duplicates included.
  [[nodiscard]] std::uint64_t inserted() const noexcept { return inserted_; }
  [[nodiscard]] double fp_rate() const { return bf_fp_rate(inserted_, m_, k_); }

  [[nodiscard]] std::uint64_t popcount() const noexcept {
    std::uint64_t c = 0;
    for (auto w : words_) c += static_cast<std::uint64_t>(__builtin_popcountll(w));
    return c;
  }

  // Header ("DCMF", version u8, m u64, k u8, seed u64, inserted u64) then ceil(m/8) bytes of bits;
  // little-endian, bit j lives at byte j/8, bit j%8.
  void append_to(std::vector<std::byte>& out) const {
    for (char c : {'D', 'C', 'M', 'F'}) out.push_back(static_cast<std::byte>(c));
    out.push_back(std::byte{format_version});
    put_le(out, m_, 8);
    out.push_back(static_cast<std::byte>(k_));
    put_le(out, seed_, 8);
    put_le(out, inserted_, 8);
    const std::uint64_t nbytes = byte_size();
    for (std::uint64_t b = 0; b < nbytes; ++b) out.push_back(static_cast<std::byte>((words_[b / 8] >> (8 * (b % 8))) & 0xff));
  }

  [[nodiscard]] std::vector<std::byte> serialize() const {
    std::vector<std::byte> out;
    out.reserve(header_size + byte_size());
    append_to(out);
    return out;
  }

  // Reads one filter starting at `offset` and advances it past the filter.
  static BloomFilter read_from(std::span<const std::byte> in, std::size_t& offset) {
    auto need = [&](std::size_t n) {
      if (in.size() < offset || in.size() - offset < n) throw error(errc::format_error, "truncated bloom filter blob");
    };
    need(header_size);
    const std::byte* p = in.data() + offset;
    if (p[0] != std::byte{'D'} || p[1] != std::byte{'C'} || p[2] != std::byte{'M'} || p[3] != std::byte{'F'})
      throw error(errc::format_error, "bad bloom filter magic");
    if (p[4] != std::byte{format_version}) throw error(errc::format_error, "unsupported bloom filter version");
    const std::uint64_t m = get_le(p + 5, 8);
    const auto k = static_cast<unsigned>(p[13]);
    const std::uint64_t seed = get_le(p + 14, 8);
    const std::uint64_t inserted = get_le(p + 22, 8);
    if (m == 0 || k == 0) throw error(errc::format_error, "bloom filter header has m = 0 or k = 0");
    if (m > (std::uint64_t{1} << 40)) throw error(errc::format_error, "bloom filter length implausibly large");
    offset += header_size;
    const std::uint64_t nbytes = (m + 7) / 8;
    need(nbytes);
    BloomFilter f(m, k, seed);
    f.inserted_ = inserted;
    const std::byte* bits = in.data() + offset;
    for (std::uint64_t b = 0; b < nbytes; ++b) f.words_[b / 8] |= static_cast<std::uint64_t>(bits[b]) << (8 * (b % 8));
    if (m % 64 != 0 && (f.words_.back() >> (m % 64)) != 0)
      throw error(errc::format_error, "bloom filter has bits set beyond its length");
    offset += nbytes;
    return f;
  }

  static BloomFilter deserialize(std::span<const std::byte> in) {
    std::size_t offset = 0;
    auto f = read_from(in, offset);
    if (offset != in.size()) throw error(errc::format_error, "trailing bytes after bloom filter");
    return f;
  }

  friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

private:
  [[nodiscard]] std::uint64_t index(const hashing::hash128& h, unsigned i) const noexcept {
    return (h.h1 + static_cast<std::uint64_t>(i) * h.h2) % m_;
  }
  void set_bit(std::uint64_t j) noexcept { words_[j >> 6] |= std::uint64_t{1} << (j & 63); }
  [[nodiscard]] bool test_bit(std::uint64_t j) const noexcept { return (words_[j >> 6] >> (j & 63)) & 1; }

  static void put_le(std::vector<std::byte>& out, std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  static std::uint64_t get_le(const std::byte* p, int width) {
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<std::uint64_t>(p[i]);
    return v;
  }

  std::uint64_t m_;
  unsigned k_;
  std::uint64_t seed_;
  std::uint64_t inserted_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace dcm
