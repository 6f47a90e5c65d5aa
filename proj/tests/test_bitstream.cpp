#include <catch_amalgamated.hpp>

#include <random>

#include "chaoscipher/bitstream.hpp"

using chaoscipher::BitStream;
using chaoscipher::Error;

TEST_CASE("pack and unpack round trip for every length up to 64", "[bitstream]") {
  std::mt19937_64 rng(7);
  for (std::size_t n = 0; n <= 64; ++n) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    const auto s = BitStream::from_bits(bits);
    REQUIRE(s.size() == n);
    REQUIRE(s.unpack() == bits);
    REQUIRE(s.packed().size() == (n + 7) / 8);
    REQUIRE(BitStream::from_packed(s.packed(), n) == s);
  }
}

TEST_CASE("bits are stored MSB-first", "[bitstream]") {
  const auto s = BitStream::from_string("1000000001");
  REQUIRE(s.packed() == std::vector<std::uint8_t>{0x80, 0x40});
  REQUIRE(s.to_string() == "1000000001");
}

TEST_CASE("padding is kept zero", "[bitstream]") {
  auto s = BitStream::from_string("111");
  REQUIRE(s.packed()[0] == 0xE0);
  REQUIRE(s.complement().packed()[0] == 0x00);
  REQUIRE(s.prefix(2).packed()[0] == 0xC0);
  REQUIRE_THROWS_AS(BitStream::from_packed({0xE1}, 3), Error);
  REQUIRE_THROWS_AS(BitStream::from_packed({0xE0, 0x00}, 3), Error);
}

TEST_CASE("mutation and counting", "[bitstream]") {
  BitStream s(10);
  REQUIRE(s.count_ones() == 0);
  s.set(3, true);
  s.flip(9);
  s.push_back(true);
  REQUIRE(s.to_string() == "00010000011");
  REQUIRE(s.count_ones() == 3);
  s.flip(3);
  REQUIRE(s.count_ones() == 2);
}

TEST_CASE("from_string rejects other characters", "[bitstream]") {
  REQUIRE_THROWS_AS(BitStream::from_string("0120"), Error);
  REQUIRE(BitStream::from_string("").empty());
}
