#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"

namespace dcm {

/// Dyadic sampling rate numerator / 2^precision_bits.
struct SampleRate {
  std::uint64_t numerator = 1;
  unsigned precision_bits = 1;

  SampleRate() = default;
  SampleRate(std::uint64_t num, unsigned bits) : numerator(num), precision_bits(bits) {
    if (bits < 1 || bits > 32) throw error(errc::invalid_parameter, "precision bits must lie in [1, 32]");
    if (num == 0 || num >= (std::uint64_t{1} << bits))
      throw error(errc::invalid_parameter, "rate numerator must lie in (0, 2^bits)");
  }

  // Rounds an arbitrary rate to the nearest representable one at the given precision.
  static SampleRate rounded(double rate, unsigned bits) {
    if (bits < 1 || bits > 32) throw error(errc::invalid_parameter, "precision bits must lie in [1, 32]");
    const double scale = std::ldexp(1.0, static_cast<int>(bits));
    auto num = static_cast<std::int64_t>(std::llround(rate * scale));
    num = std::clamp<std::int64_t>(num, 1, static_cast<std::int64_t>(scale) - 1);
    return SampleRate(static_cast<std::uint64_t>(num), bits);
  }

  [[nodiscard]] double value() const noexcept {
    return std::ldexp(static_cast<double>(numerator), -static_cast<int>(precision_bits));
  }

  friend bool operator==(const SampleRate&, const SampleRate&) = default;
};

inline std::string to_string(const SampleRate& r) {
  return std::to_string(r.numerator) + "/2^" + std::to_string(r.precision_bits);
}

struct PacketId {
  FlowKey flow;
  std::uint32_t discriminator = 0;  // packet ordinal within its flow in simulation
};

/// Keyed hash of a packet mapped into [0, 1). Uses the top 53 bits so the result is exact in a double
/// and can never round up to 1.
inline double packet_hash(const PacketId& p, std::uint64_t seed) noexcept {
  std::array<std::byte, FlowKey::wire_size + 4> buf{};
  const auto key = p.flow.bytes();
  std::copy(key.begin(), key.end(), buf.begin());
  for (int i = 0; i < 4; ++i)
    buf[FlowKey::wire_size + static_cast<std::size_t>(i)] = static_cast<std::byte>((p.discriminator >> (24 - 8 * i)) & 0xff);
  const auto h = hashing::murmur3_128(std::span<const std::byte>(buf), seed);
  return static_cast<double>(h.h1 >> 11) * 0x1p-53;
}

/// Positions (1-based from the binary point) of the 1 bits of the rate's binary expansion, so that
/// rate = sum of 2^-b over the result.
inline std::vector<unsigned> rate_to_actions(const SampleRate& r) {
  std::vector<unsigned> out;
  for (unsigned t = 1; t <= r.precision_bits; ++t) {
    if ((r.numerator >> (r.precision_bits - t)) & 1) out.push_back(t);
  }
  return out;
}

struct HalfOpenInterval {
  double lo;
  double hi;

  [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x < hi; }
};

/// Interval i covers [2^-i, 2^-(i-1)).
inline HalfOpenInterval action_interval(unsigned i) {
  if (i == 0) throw error(errc::invalid_parameter, "interval index must be >= 1");
  return {std::ldexp(1.0, -static_cast<int>(i)), std::ldexp(1.0, -static_cast<int>(i) + 1)};
}

inline bool should_sample(unsigned i, double h) { return action_interval(i).contains(h); }

}  // namespace dcm
