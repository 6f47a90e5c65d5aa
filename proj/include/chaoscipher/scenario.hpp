#pragma once

#include <charconv>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "chaoscipher/cipher.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/kv.hpp"
#include "chaoscipher/laser.hpp"
#include "chaoscipher/phy.hpp"
#include "chaoscipher/trng.hpp"

// Scenario files are sectioned key = value text:
//
//   # comment
//   [laser]
//   tauP_ps = 2
//   [link]
//   noise_sigma = 0.01
//
// Keys carry their unit in the name. Keys that are absent keep their default;
// unknown sections or keys are rejected.

namespace chaoscipher {

struct EyeExport {
  std::size_t time_bins = 128;
  std::size_t amp_bins = 96;
};

struct OutputPaths {
  std::string chaos_trace = "chaos_trace.bin";
  std::string key = "key.bits";
  std::string ciphertext = "cipher.bits";
  std::string plaintext = "plain.bits";
  std::string report = "report.txt";
  std::string stats = "stats.txt";
  std::string eye_prefix = "eye";        // <prefix>_ld.pgm, <prefix>_sampled.pgm
  std::string waveform_dir = "waveforms";
};

struct Scenario {
  LaserParams laser{};
  ChaosConfig chaos{};
  AdcConfig adc{};
  ExtractorConfig extractor{};
  PrbsConfig prbs{};
  LinkConfig link{};
  std::size_t bits = 10000;
  std::size_t sim_record_every = 500;  // chaos record stride used by simulate (0.1 ns at 0.2 ps)
  EyeExport eye{};
  OutputPaths out{};

  void validate() const {
    laser.validate();
    chaos.validate();
    adc.validate();
    extractor.validate(adc.bits);
    prbs.validate();
    link.validate();
    require(bits >= 1, ErrorKind::config, "run needs at least one bit");
    require(sim_record_every >= 1, ErrorKind::config, "sim_record_every must be at least 1");
    require(eye.time_bins >= 1 && eye.amp_bins >= 1, ErrorKind::config, "eye bins must be positive");
  }

  /// The configuration simulate hands to the link model.
  [[nodiscard]] EndToEndConfig end_to_end() const {
    EndToEndConfig cfg;
    cfg.laser = laser;
    cfg.chaos = chaos;
    cfg.chaos.record_every = sim_record_every;
    cfg.adc = adc;
    cfg.extractor = extractor;
    cfg.prbs = prbs;
    cfg.link = link;
    cfg.bits = bits;
    return cfg;
  }

  /// One seed for every random source: chaos phase, receiver noise and the
  /// plaintext register (folded into a nonzero register state).
  void reseed(std::uint64_t seed) {
    chaos.seed = seed;
    link.noise_seed = seed;
    const std::uint64_t mask = (std::uint64_t{1} << prbs.order) - 1;
    std::uint64_t s = seed & mask;
    if (s == 0) s = 1;
    prbs.seed = static_cast<std::uint32_t>(s);
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  require(res.ec == std::errc{} && res.ptr == end, ErrorKind::config,
          "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  return v;
}

inline void parse_value(std::string_view text, std::string_view key, double& v) {
  v = parse_number<double>(text, key);
}

template <typename Int>
  requires std::is_integral_v<Int>
void parse_value(std::string_view text, std::string_view key, Int& v) {
  if constexpr (std::is_unsigned_v<Int>) {
    if (text.starts_with("0x") || text.starts_with("0X")) {
      std::uint64_t u{};
      const auto* end = text.data() + text.size();
      const auto res = std::from_chars(text.data() + 2, end, u, 16);
      require(res.ec == std::errc{} && res.ptr == end && u <= std::numeric_limits<Int>::max(),
              ErrorKind::config, "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
      v = static_cast<Int>(u);
      return;
    }
  }
  v = parse_number<Int>(text, key);
}

inline void parse_value(std::string_view text, std::string_view, std::string& v) { v = std::string(text); }

inline void parse_value(std::string_view text, std::string_view key, RangeMode& v) {
  if (text == "min_max") v = RangeMode::min_max;
  else if (text == "mean_sigma") v = RangeMode::mean_sigma;
  else fail(ErrorKind::config, std::string(key) + " must be min_max or mean_sigma");
}

inline void parse_value(std::string_view text, std::string_view key, BitOrder& v) {
  if (text == "msb_first") v = BitOrder::msb_first;
  else if (text == "lsb_first") v = BitOrder::lsb_first;
  else fail(ErrorKind::config, std::string(key) + " must be msb_first or lsb_first");
}

inline void parse_value(std::string_view text, std::string_view key, ThresholdMode& v) {
  if (text == "midpoint") v = ThresholdMode::midpoint;
  else if (text == "two_cluster") v = ThresholdMode::two_cluster;
  else fail(ErrorKind::config, std::string(key) + " must be midpoint or two_cluster");
}

/// Comma separated tap list, e.g. "15,14".
inline void parse_value(std::string_view text, std::string_view key, std::vector<int>& v) {
  v.clear();
  while (!text.empty()) {
    const auto comma = text.find(',');
    v.push_back(parse_number<int>(trim(text.substr(0, comma)), key));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
}

inline std::string format_value(double v) { return format_double(v); }
template <typename Int>
  requires std::is_integral_v<Int>
std::string format_value(Int v) {
  return std::to_string(v);
}
inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(RangeMode v) { return v == RangeMode::min_max ? "min_max" : "mean_sigma"; }
inline std::string format_value(BitOrder v) { return v == BitOrder::msb_first ? "msb_first" : "lsb_first"; }
inline std::string format_value(ThresholdMode v) {
  return v == ThresholdMode::midpoint ? "midpoint" : "two_cluster";
}
inline std::string format_value(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail

/// Calls f(section, key, field) for every scenario field, in file order.
template <typename S, typename F>
  requires std::is_same_v<std::remove_const_t<S>, Scenario>
void for_each_field(S& s, F&& f) {
  f("laser", "wavelength_nm", s.laser.wavelength_nm);
  f("laser", "N0_per_um3", s.laser.N0_per_um3);
  f("laser", "gain_um3_per_ns", s.laser.gain_um3_per_ns);
  f("laser", "tauN_ns", s.laser.tauN_ns);
  f("laser", "tauP_ps", s.laser.tauP_ps);
  f("laser", "tauIn_ps", s.laser.tauIn_ps);
  f("laser", "alpha", s.laser.alpha);
  f("laser", "eps_um3", s.laser.eps_um3);
  f("laser", "volume_um3", s.laser.volume_um3);
  f("laser", "Ith_nominal_mA", s.laser.Ith_nominal_mA);

  f("feedback", "kappa", s.chaos.feedback.kappa);
  f("feedback", "tauF_ns", s.chaos.feedback.tauF_ns);
  f("feedback", "phi0_rad", s.chaos.feedback.phi0_rad);

  f("chaos", "bias_factor", s.chaos.bias_factor);
  f("chaos", "amplitude_factor", s.chaos.amplitude_factor);
  f("chaos", "freq_GHz", s.chaos.freq_GHz);
  f("chaos", "dt_ps", s.chaos.dt_ps);
  f("chaos", "duration_ns", s.chaos.duration_ns);
  f("chaos", "transient_ns", s.chaos.transient_ns);
  f("chaos", "record_every", s.chaos.record_every);
  f("chaos", "seed", s.chaos.seed);

  f("adc", "bits", s.adc.bits);
  f("adc", "clock_GHz", s.adc.clock_GHz);
  f("adc", "phase_ns", s.adc.phase_ns);
  f("adc", "range", s.adc.range);
  f("adc", "sigma_k", s.adc.sigma_k);

  f("extractor", "shift_samples", s.extractor.shift_samples);
  f("extractor", "lsb_count", s.extractor.lsb_count);
  f("extractor", "order", s.extractor.order);

  f("prbs", "order", s.prbs.order);
  f("prbs", "taps", s.prbs.taps);
  f("prbs", "seed", s.prbs.seed);

  f("link", "bitrate_Gbps", s.link.bitrate_Gbps);
  f("link", "lpf_order", s.link.lpf_order);
  f("link", "lpf_cutoff_GHz", s.link.lpf_cutoff_GHz);
  f("link", "pd_responsivity", s.link.pd_responsivity);
  f("link", "noise_sigma", s.link.noise_sigma);
  f("link", "noise_seed", s.link.noise_seed);
  f("link", "sample_phase", s.link.sample_phase);
  f("link", "threshold", s.link.threshold);
  f("link", "crosstalk", s.link.crosstalk);
  f("link", "low_factor", s.link.low_factor);
  f("link", "high_factor", s.link.high_factor);
  f("link", "rise_ps", s.link.rise_ps);
  f("link", "dt_ps", s.link.dt_ps);
  f("link", "record_every", s.link.record_every);
  f("link", "preamble_bits", s.link.preamble_bits);
  f("link", "guard_bits", s.link.guard_bits);

  f("run", "bits", s.bits);
  f("run", "sim_record_every", s.sim_record_every);

  f("eye", "time_bins", s.eye.time_bins);
  f("eye", "amp_bins", s.eye.amp_bins);

  f("output", "chaos_trace", s.out.chaos_trace);
  f("output", "key", s.out.key);
  f("output", "ciphertext", s.out.ciphertext);
  f("output", "plaintext", s.out.plaintext);
  f("output", "report", s.out.report);
  f("output", "stats", s.out.stats);
  f("output", "eye_prefix", s.out.eye_prefix);
  f("output", "waveform_dir", s.out.waveform_dir);
}

/// Applies `text` on top of `base`. Errors carry the offending line number.
inline Scenario parse_scenario(std::string_view text, Scenario base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    auto body = trim(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = trim(body.substr(0, hash));
    if (body.empty()) continue;

    if (body.front() == '[') {
      require(body.back() == ']', ErrorKind::config, where + "unterminated section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      bool known = false;
      for_each_field(base, [&](std::string_view sec, std::string_view, auto&) { known |= sec == section; });
      require(known, ErrorKind::config, where + "unknown section [" + section + "]");
      continue;
    }

    const auto eq = body.find('=');
    require(eq != std::string_view::npos, ErrorKind::config, where + "expected key = value");
    require(!section.empty(), ErrorKind::config, where + "key outside any section");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    bool found = false;
    for_each_field(base, [&](std::string_view sec, std::string_view k, auto& field) {
      if (sec != section || k != key) return;
      found = true;
      try {
        detail::parse_value(value, k, field);
      } catch (const Error& e) {
        fail(ErrorKind::config, where + e.what());
      }
    });
    require(found, ErrorKind::config, where + "unknown key '" + std::string(key) + "' in [" + section + "]");
  }
  return base;
}

/// Full scenario text with every field; parse_scenario(to_text(s)) == s.
inline std::string to_text(const Scenario& s) {
  std::string out;
  std::string_view section;
  for_each_field(s, [&](std::string_view sec, std::string_view key, const auto& field) {
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + std::string(sec) + "]\n";
      section = sec;
    }
    out += std::string(key) + " = " + detail::format_value(field) + "\n";
  });
  return out;
}

}  // namespace chaoscipher
