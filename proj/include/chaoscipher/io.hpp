#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/kv.hpp"
#include "chaoscipher/phy.hpp"
#include "chaoscipher/waveform.hpp"

// File formats.
//
//   trace, binary : "CTRC" | u32 version | f64 dt_ns | u64 count | count x f64
//   trace, CSV    : header "t_ns,value", one sample per row, 17 significant digits
//   bitstream     : "BITS" | u32 version | u64 lenBits | packed bytes, MSB-first
//
// All binary integers and floats are little-endian.

namespace chaoscipher::io {

inline constexpr std::uint32_t format_version = 1;
inline constexpr std::array<char, 4> trace_magic{'C', 'T', 'R', 'C'};
inline constexpr std::array<char, 4> bits_magic{'B', 'I', 'T', 'S'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  double f64() { return std::bit_cast<double>(uint(8)); }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

private:
  void need(std::size_t n) const {
    require(data_.size() - pos_ >= n, ErrorKind::input, "truncated binary file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  require(static_cast<bool>(out), ErrorKind::io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Waveforms

inline std::string encode_trace(const Waveform& w) {
  std::string out(trace_magic.begin(), trace_magic.end());
  out.reserve(24 + 8 * w.size());
  detail::put_u32(out, format_version);
  detail::put_f64(out, w.dt_ns);
  detail::put_u64(out, w.size());
  for (double v : w.samples) detail::put_f64(out, v);
  return out;
}

inline Waveform decode_trace(std::string_view data) {
  detail::Reader r(data);
  require(r.take(4) == std::string_view(trace_magic.data(), 4), ErrorKind::input,
          "not a CTRC trace file");
  require(r.uint(4) == format_version, ErrorKind::input, "unsupported trace version");
  Waveform w;
  w.dt_ns = r.f64();
  const std::uint64_t count = r.uint(8);
  require(r.remaining() == count * 8, ErrorKind::input, "trace sample count does not match file size");
  w.samples.resize(count);
  for (auto& v : w.samples) v = r.f64();
  return w;
}

inline std::string encode_trace_csv(const Waveform& w) {
  std::string out = "t_ns,value\n";
  char buf[80];
  for (std::size_t k = 0; k < w.size(); ++k) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", static_cast<double>(k) * w.dt_ns,
                                w.samples[k]);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

/// The step is recovered from the first two time stamps.
inline Waveform decode_trace_csv(std::string_view data) {
  std::istringstream in{std::string(data)};
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && trim(line) == "t_ns,value", ErrorKind::input,
          "CSV trace must start with header t_ns,value");
  std::vector<double> times;
  Waveform w;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto comma = body.find(',');
    require(comma != std::string_view::npos, ErrorKind::input, "malformed CSV row: " + line);
    const std::string t_str(body.substr(0, comma));
    const std::string v_str(body.substr(comma + 1));
    char* end = nullptr;
    const double t = std::strtod(t_str.c_str(), &end);
    require(end != t_str.c_str() && *end == '\0', ErrorKind::input, "bad time value: " + t_str);
    const double v = std::strtod(v_str.c_str(), &end);
    require(end != v_str.c_str() && *end == '\0', ErrorKind::input, "bad sample value: " + v_str);
    times.push_back(t);
    w.samples.push_back(v);
  }
  require(times.size() >= 2, ErrorKind::input, "CSV trace needs at least two samples");
  w.dt_ns = times[1] - times[0];
  require(w.dt_ns > 0, ErrorKind::input, "CSV time stamps must increase");
  return w;
}

inline bool is_csv_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv";
}

/// Writes CSV for a .csv path, binary otherwise.
inline void write_trace(const std::filesystem::path& path, const Waveform& w) {
  write_file(path, is_csv_path(path) ? encode_trace_csv(w) : encode_trace(w));
}

/// Reads either format, detected from the magic bytes.
inline Waveform read_trace(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() >= 4 && std::string_view(data).substr(0, 4) == std::string_view(trace_magic.data(), 4))
    return decode_trace(data);
  return decode_trace_csv(data);
}

// ---------------------------------------------------------------------------
// Bitstreams

inline std::string encode_bits(const BitStream& b) {
  std::string out(bits_magic.begin(), bits_magic.end());
  detail::put_u32(out, format_version);
  detail::put_u64(out, b.size());
  out.append(reinterpret_cast<const char*>(b.packed().data()), b.packed().size());
  return out;
}

inline BitStream decode_bits(std::string_view data) {
  detail::Reader r(data);
  require(r.take(4) == std::string_view(bits_magic.data(), 4), ErrorKind::input,
          "not a BITS bitstream file");
  require(r.uint(4) == format_version, ErrorKind::input, "unsupported bitstream version");
  const std::uint64_t len = r.uint(8);
  require(r.remaining() == (len + 7) / 8, ErrorKind::input, "bitstream length does not match file size");
  const auto bytes = r.take(r.remaining());
  return BitStream::from_packed(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), len);
}

inline void write_bits(const std::filesystem::path& path, const BitStream& b) {
  write_file(path, encode_bits(b));
}

inline BitStream read_bits(const std::filesystem::path& path) { return decode_bits(read_file(path)); }

// ---------------------------------------------------------------------------
// Eye diagrams

/// 8-bit binary greyscale, counts scaled so the fullest bin is 255. The top
/// row is the highest amplitude bin.
inline std::string encode_pgm(const EyeDiagram& e) {
  std::string out = "P5\n" + std::to_string(e.time_bins) + " " + std::to_string(e.amp_bins) + "\n255\n";
  const std::uint64_t peak = e.counts.empty() ? 0 : *std::ranges::max_element(e.counts);
  for (std::size_t row = 0; row < e.amp_bins; ++row) {
    const std::size_t amp_bin = e.amp_bins - 1 - row;
    for (std::size_t t = 0; t < e.time_bins; ++t) {
      const auto c = e.at(t, amp_bin);
      const auto level =
          peak == 0 ? 0 : static_cast<int>(std::lround(255.0 * static_cast<double>(c) / static_cast<double>(peak)));
      out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
    }
  }
  return out;
}

inline std::string encode_eye_csv(const EyeDiagram& e) {
  std::string out = "timeBin,ampBin,count\n";
  for (std::size_t a = 0; a < e.amp_bins; ++a)
    for (std::size_t t = 0; t < e.time_bins; ++t)
      out += std::to_string(t) + "," + std::to_string(a) + "," + std::to_string(e.at(t, a)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Per-stage waveform panels of an end-to-end run

/// Ideal (zero rise time) 0/1 line signal of a bitstream on the given grid.
inline Waveform bit_levels(const BitStream& bits, double bitrate_Gbps, double dt_ns) {
  const auto spb = static_cast<std::size_t>(std::llround(1.0 / (bitrate_Gbps * dt_ns)));
  Waveform w{dt_ns, {}};
  w.samples.reserve(bits.size() * spb);
  for (std::size_t k = 0; k < bits.size(); ++k) w.samples.insert(w.samples.end(), spb, bits[k] ? 1.0 : 0.0);
  return w;
}

/// Writes the first `window_bits` bit periods of every stage as CSV traces
/// under `dir` and returns the paths written.
inline std::vector<std::filesystem::path> write_panels(const std::filesystem::path& dir,
                                                       const EndToEndResult& r, double bitrate_Gbps,
                                                       std::size_t window_bits = 500) {
  const std::size_t nbits = std::min(window_bits, r.plaintext.size());
  const double span_ns = static_cast<double>(nbits) / bitrate_Gbps;
  const auto window = [&](const Waveform& w) {
    const auto n = std::min(w.size(), static_cast<std::size_t>(std::llround(span_ns / w.dt_ns)));
    return Waveform{w.dt_ns, {w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(n)}};
  };
  const double dt = r.ld_key.dt_ns;
  const std::pair<const char*, Waveform> panels[] = {
      {"chaos.csv", window(r.chaos)},
      {"key.csv", bit_levels(r.key.prefix(nbits), bitrate_Gbps, dt)},
      {"plaintext.csv", bit_levels(r.plaintext.prefix(nbits), bitrate_Gbps, dt)},
      {"ciphertext.csv", bit_levels(r.ciphertext.prefix(nbits), bitrate_Gbps, dt)},
      {"ld_key.csv", window(r.ld_key)},
      {"ld_cipher.csv", window(r.ld_cipher)},
      {"rx_key.csv", window(r.rx_key)},
      {"rx_cipher.csv", window(r.rx_cipher)},
      {"decrypted.csv", bit_levels(r.plaintext_rx.prefix(nbits), bitrate_Gbps, dt)},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, w] : panels) {
    written.push_back(dir / name);
    write_trace(written.back(), w);
  }
  return written;
}

}  // namespace chaoscipher::io
