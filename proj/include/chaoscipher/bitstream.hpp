#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chaoscipher/error.hpp"

namespace chaoscipher {

/// Packed, length-tagged bit sequence.
///
/// Bit i lives in bit (7 - i % 8) of byte i / 8 (MSB-first). Padding bits of
/// the final byte are always zero, so two streams with equal bits compare equal
/// byte-for-byte.
class BitStream {
public:
  BitStream() = default;

  /// A stream of `n` zero bits.
  explicit BitStream(std::size_t n) : packed_((n + 7) / 8, 0), len_(n) {}

  /// From unpacked 0/1 values; any nonzero value counts as 1.
  static BitStream from_bits(std::span<const std::uint8_t> bits) {
    BitStream out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.set(i, true);
    return out;
  }

  /// From a string of '0' / '1' characters.
  static BitStream from_string(std::string_view s) {
    BitStream out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(s[i] == '0' || s[i] == '1', ErrorKind::input,
              "bit string may only contain '0' and '1'");
      if (s[i] == '1') out.set(i, true);
    }
    return out;
  }

  /// Adopts packed bytes. Rejects size mismatches and nonzero padding.
  static BitStream from_packed(std::vector<std::uint8_t> packed, std::size_t len_bits) {
    require(packed.size() == (len_bits + 7) / 8, ErrorKind::input,
            "packed byte count does not match bit length");
    if (len_bits % 8 != 0) {
      const auto pad_mask = static_cast<std::uint8_t>(0xFFu >> (len_bits % 8));
      require((packed.back() & pad_mask) == 0, ErrorKind::input,
              "nonzero padding bits in final byte");
    }
    BitStream out;
    out.packed_ = std::move(packed);
    out.len_ = len_bits;
    return out;
  }

  [[nodiscard]] std::size_t size() const noexcept { return len_; }
  [[nodiscard]] bool empty() const noexcept { return len_ == 0; }
  [[nodiscard]] const std::vector<std::uint8_t>& packed() const noexcept { return packed_; }

  [[nodiscard]] bool operator[](std::size_t i) const noexcept {
    return (packed_[i >> 3] >> (7 - (i & 7))) & 1u;
  }

  void set(std::size_t i, bool value) noexcept {
    const auto mask = static_cast<std::uint8_t>(0x80u >> (i & 7));
    if (value)
      packed_[i >> 3] |= mask;
    else
      packed_[i >> 3] &= static_cast<std::uint8_t>(~mask);
  }

  void flip(std::size_t i) noexcept { packed_[i >> 3] ^= static_cast<std::uint8_t>(0x80u >> (i & 7)); }

  void push_back(bool value) {
    if ((len_ & 7) == 0) packed_.push_back(0);
    ++len_;
    set(len_ - 1, value);
  }

  void reserve(std::size_t n_bits) { packed_.reserve((n_bits + 7) / 8); }

  /// First `n` bits (n <= size()).
  [[nodiscard]] BitStream prefix(std::size_t n) const {
    require(n <= len_, ErrorKind::input, "prefix longer than stream");
    BitStream out;
    out.packed_.assign(packed_.begin(), packed_.begin() + static_cast<std::ptrdiff_t>((n + 7) / 8));
    out.len_ = n;
    if (n % 8 != 0) out.packed_.back() &= static_cast<std::uint8_t>(0xFFu << (8 - n % 8));
    return out;
  }

  /// Bitwise complement over the valid bits.
  [[nodiscard]] BitStream complement() const {
    BitStream out = *this;
    for (auto& b : out.packed_) b = static_cast<std::uint8_t>(~b);
    if (len_ % 8 != 0) out.packed_.back() &= static_cast<std::uint8_t>(0xFFu << (8 - len_ % 8));
    return out;
  }

  [[nodiscard]] std::size_t count_ones() const noexcept {
    std::size_t n = 0;
    for (auto b : packed_) n += static_cast<std::size_t>(std::popcount(b));
    return n;
  }

  [[nodiscard]] std::vector<std::uint8_t> unpack() const {
    std::vector<std::uint8_t> bits(len_);
    for (std::size_t i = 0; i < len_; ++i) bits[i] = (*this)[i] ? 1 : 0;
    return bits;
  }

  [[nodiscard]] std::string to_string() const {
    std::string s(len_, '0');
    for (std::size_t i = 0; i < len_; ++i)
      if ((*this)[i]) s[i] = '1';
    return s;
  }

  friend bool operator==(const BitStream&, const BitStream&) = default;

private:
  std::vector<std::uint8_t> packed_;
  std::size_t len_ = 0;
};

}  // namespace chaoscipher
