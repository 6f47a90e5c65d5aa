#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/error.hpp"

namespace chaoscipher {

/// Feedback taps (1-based register positions) of a maximal-length Fibonacci
/// LFSR, one primitive polynomial per register length 2..32.
inline std::vector<int> maximal_taps(int order) {
  static const std::array<std::vector<int>, 33> table = {{
      {}, {},
      {2, 1}, {3, 2}, {4, 3}, {5, 3}, {6, 5}, {7, 6}, {8, 6, 5, 4},
      {9, 5}, {10, 7}, {11, 9}, {12, 6, 4, 1}, {13, 4, 3, 1}, {14, 5, 3, 1},
      {15, 14}, {16, 15, 13, 4}, {17, 14}, {18, 11}, {19, 6, 2, 1}, {20, 17},
      {21, 19}, {22, 21}, {23, 18}, {24, 23, 22, 17}, {25, 22}, {26, 6, 2, 1},
      {27, 5, 2, 1}, {28, 25}, {29, 27}, {30, 6, 4, 1}, {31, 28}, {32, 22, 2, 1},
  }};
  require(order >= 2 && order <= 32, ErrorKind::config, "PRBS order must be 2..32");
  return table[static_cast<std::size_t>(order)];
}

struct PrbsConfig {
  int order = 15;
  std::vector<int> taps = maximal_taps(15);
  std::uint32_t seed = 0x7FFF;

  /// Config for `order` with its maximal-length taps.
  static PrbsConfig maximal(int order, std::uint32_t seed = 1) {
    return {order, maximal_taps(order), seed};
  }

  void validate() const {
    require(order >= 2 && order <= 32, ErrorKind::config, "PRBS order must be 2..32");
    require(!taps.empty(), ErrorKind::config, "PRBS needs at least one tap");
    require(std::ranges::all_of(taps, [this](int t) { return t >= 1 && t <= order; }),
            ErrorKind::config, "PRBS tap outside the register");
    require(std::ranges::find(taps, order) != taps.end(), ErrorKind::config,
            "PRBS taps must include the register length");
    const std::uint64_t mask = (std::uint64_t{1} << order) - 1;
    require(seed != 0 && (seed & mask) != 0, ErrorKind::config, "PRBS seed must be nonzero");
    require((seed & ~mask) == 0, ErrorKind::config, "PRBS seed wider than the register");
  }
};

/// Fibonacci LFSR: each step shifts left, inserting the XOR of the tapped
/// positions, and emits that new bit.
inline BitStream prbs(const PrbsConfig& cfg, std::size_t nbits) {
  cfg.validate();
  const std::uint64_t mask = (std::uint64_t{1} << cfg.order) - 1;
  std::uint64_t tap_mask = 0;
  for (int t : cfg.taps) tap_mask |= std::uint64_t{1} << (t - 1);

  std::uint64_t reg = cfg.seed;
  BitStream out;
  out.reserve(nbits);
  for (std::size_t i = 0; i < nbits; ++i) {
    const bool bit = std::popcount(reg & tap_mask) & 1;
    reg = ((reg << 1) | static_cast<std::uint64_t>(bit)) & mask;
    out.push_back(bit);
  }
  return out;
}

/// out[i] = data[i] ^ key[i]. The key is consumed from its start and must be at
/// least as long as the data; it is never wrapped.
inline BitStream xor_stream(const BitStream& data, const BitStream& key) {
  require(key.size() >= data.size(), ErrorKind::input,
          "key exhausted: " + std::to_string(key.size()) + " key bits for " +
              std::to_string(data.size()) + " data bits");
  auto bytes = data.packed();
  const auto& k = key.packed();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] ^= k[i];
  if (data.size() % 8 != 0)
    bytes.back() &= static_cast<std::uint8_t>(0xFFu << (8 - data.size() % 8));
  return BitStream::from_packed(std::move(bytes), data.size());
}

}  // namespace chaoscipher
