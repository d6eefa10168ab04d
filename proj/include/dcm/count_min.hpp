#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"

namespace dcm {

/// Count-Min sketch over flow keys: `depth` rows of 32-bit saturating counters, each row indexed by
/// its own keyed hash of the flow.
class CountMinSketch {
public:
  using counter = std::uint32_t;
  static constexpr std::size_t counter_bytes = sizeof(counter);
  static constexpr std::size_t default_depth = 4;

  CountMinSketch(std::size_t depth, std::size_t width, std::uint64_t seed)
      : depth_(depth), width_(width), seed_(seed) {
    if (depth == 0 || width == 0) throw error(errc::invalid_parameter, "count-min sketch needs depth, width >= 1");
    counters_.assign(depth * width, 0);
    row_seeds_.reserve(depth);
    for (std::size_t r = 0; r < depth; ++r) row_seeds_.push_back(hashing::mix_seed(seed, r));
  }

  // width = floor(memory_bytes / (4 * depth))
  static CountMinSketch with_memory(std::size_t memory_bytes, std::size_t depth, std::uint64_t seed) {
    if (depth == 0) throw error(errc::invalid_parameter, "count-min sketch depth must be >= 1");
    const std::size_t width = memory_bytes / (counter_bytes * depth);
    if (width == 0) throw error(errc::invalid_parameter, "memory too small for one counter per row");
    return CountMinSketch(depth, width, seed);
  }

  void increment(const FlowKey& flow, std::uint64_t delta = 1) {
    if (delta == 0) throw error(errc::invalid_parameter, "count-min increment must be >= 1");
    const auto key = flow.bytes();
    for (std::size_t r = 0; r < depth_; ++r) {
      counter& c = counters_[r * width_ + column(key, r)];
      const std::uint64_t room = std::numeric_limits<counter>::max() - c;
      if (delta > room) {
        c = std::numeric_limits<counter>::max();
        saturated_ = true;
      } else {
        c += static_cast<counter>(delta);
      }
    }
  }

  [[nodiscard]] std::uint64_t query(const FlowKey& flow) const {
    const auto key = flow.bytes();
    counter best = std::numeric_limits<counter>::max();
    for (std::size_t r = 0; r < depth_; ++r) best = std::min(best, counters_[r * width_ + column(key, r)]);
    return best;
  }

  [[nodiscard]] std::size_t depth() const noexcept { return depth_; }
  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::size_t memory_bytes() const noexcept { return depth_ * width_ * counter_bytes; }
  [[nodiscard]] bool saturated() const noexcept { return saturated_; }
  [[nodiscard]] counter at(std::size_t row, std::size_t col) const { return counters_.at(row * width_ + col); }

  friend bool operator==(const CountMinSketch&, const CountMinSketch&) = default;

private:
  [[nodiscard]] std::size_t column(const std::array<std::byte, FlowKey::wire_size>& key, std::size_t row) const {
    const auto h = hashing::murmur3_128(std::span<const std::byte>(key), row_seeds_[row]);
    return static_cast<std::size_t>(h.h1 % width_);
  }

  std::size_t depth_;
  std::size_t width_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> row_seeds_;
  std::vector<counter> counters_;
  bool saturated_ = false;
};

}  // namespace dcm
