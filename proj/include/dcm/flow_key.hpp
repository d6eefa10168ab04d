#pragma once

#include <array>
#include <charconv>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "dcm/hash.hpp"

namespace dcm {

using ipv4 = std::uint32_t;

/// Flow identity: the 5-tuple. Hashing always goes through `bytes()` so the controller's replicas
/// and the switches' filters see the same input.
struct FlowKey {
  ipv4 src_ip = 0;
  ipv4 dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  static constexpr std::size_t wire_size = 13;

  // 4B src IP, 4B dst IP, 2B src port, 2B dst port, 1B protocol, all big-endian.
  [[nodiscard]] std::array<std::byte, wire_size> bytes() const noexcept {
    std::array<std::byte, wire_size> out{};
    auto put = [&out](std::size_t at, std::uint64_t v, std::size_t width) {
      for (std::size_t i = 0; i < width; ++i) out[at + i] = static_cast<std::byte>((v >> (8 * (width - 1 - i))) & 0xff);
    };
    put(0, src_ip, 4);
    put(4, dst_ip, 4);
    put(8, src_port, 2);
    put(10, dst_port, 2);
    put(12, protocol, 1);
    return out;
  }

  [[nodiscard]] hashing::hash128 hash(std::uint64_t seed) const noexcept {
    const auto b = bytes();
    return hashing::murmur3_128(std::span<const std::byte>(b), seed);
  }

  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
  friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

inline std::string format_ipv4(ipv4 ip) {
  return std::to_string(ip >> 24) + '.' + std::to_string((ip >> 16) & 0xff) + '.' + std::to_string((ip >> 8) & 0xff) +
         '.' + std::to_string(ip & 0xff);
}

inline std::optional<ipv4> parse_ipv4(std::string_view s) {
  ipv4 ip = 0;
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (s.empty() || s.front() != '.') return std::nullopt;
      s.remove_prefix(1);
    }
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr == s.data() || v > 255) return std::nullopt;
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    ip = (ip << 8) | v;
  }
  if (!s.empty()) return std::nullopt;
  return ip;
}

inline std::string to_string(const FlowKey& f) {
  return format_ipv4(f.src_ip) + ':' + std::to_string(f.src_port) + "->" + format_ipv4(f.dst_ip) + ':' +
         std::to_string(f.dst_port) + '/' + std::to_string(f.protocol);
}

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& f) const noexcept { return static_cast<std::size_t>(f.hash(0).h1); }
};

}  // namespace dcm

template <>
struct std::hash<dcm::FlowKey> : dcm::FlowKeyHash {};
