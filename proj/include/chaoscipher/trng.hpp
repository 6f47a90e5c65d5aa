#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/waveform.hpp"

// Key extraction from a chaotic intensity waveform: clocked sampling, n-bit
// quantization, lag-difference modulo 2^bits, keep the low bits of each
// difference.

namespace chaoscipher {

enum class RangeMode { min_max, mean_sigma };

struct AdcConfig {
  int bits = 8;
  double clock_GHz = 1.0;
  double phase_ns = 0.0;
  RangeMode range = RangeMode::min_max;
  double sigma_k = 3.0;  // half-width in standard deviations for mean_sigma

  void validate() const {
    require(bits >= 1 && bits <= 16, ErrorKind::config, "ADC resolution must be 1..16 bits");
    require(clock_GHz > 0 && std::isfinite(clock_GHz), ErrorKind::config,
            "ADC clock must be positive");
    require(phase_ns >= 0 && std::isfinite(phase_ns), ErrorKind::config,
            "ADC phase must be non-negative");
    require(range != RangeMode::mean_sigma || sigma_k > 0, ErrorKind::config,
            "mean_sigma range needs k > 0");
  }
};

enum class BitOrder { msb_first, lsb_first };

struct ExtractorConfig {
  std::size_t shift_samples = 1;
  int lsb_count = 5;
  BitOrder order = BitOrder::msb_first;

  void validate(int adc_bits) const {
    require(shift_samples >= 1, ErrorKind::config, "difference lag must be at least 1");
    require(lsb_count >= 1 && lsb_count <= adc_bits, ErrorKind::config,
            "kept bit count must be between 1 and the ADC resolution");
  }
};

/// ADC output codes, each in [0, 2^bits - 1].
struct SymbolSeq {
  std::vector<std::uint32_t> codes;
  int bits = 8;

  friend bool operator==(const SymbolSeq&, const SymbolSeq&) = default;
};

/// Nominal key rate in Gbit/s for a clock and extractor.
inline double key_rate_Gbps(const AdcConfig& adc, const ExtractorConfig& ext) {
  return adc.clock_GHz * ext.lsb_count;
}

/// Key length produced from `clocked` samples.
inline std::size_t key_length(std::size_t clocked, const ExtractorConfig& ext) {
  return clocked > ext.shift_samples ? (clocked - ext.shift_samples) * static_cast<std::size_t>(ext.lsb_count)
                                     : 0;
}

/// Resamples at the ADC clock, taking the source sample nearest each clock edge.
inline Waveform clock_sample(const Waveform& w, const AdcConfig& cfg) {
  cfg.validate();
  require(!w.empty() && w.dt_ns > 0, ErrorKind::input, "empty waveform");
  const double period = 1.0 / cfg.clock_GHz;
  require(period >= w.dt_ns * (1.0 - 1e-9), ErrorKind::config,
          "ADC clock is faster than the source sampling rate");
  const double span = w.span_ns();
  require(cfg.phase_ns <= span, ErrorKind::input, "ADC phase beyond end of waveform");

  const auto count =
      static_cast<std::size_t>(std::floor((span - cfg.phase_ns) * cfg.clock_GHz + 1e-9)) + 1;
  Waveform out;
  out.dt_ns = period;
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = cfg.phase_ns + static_cast<double>(k) * period;
    auto idx = static_cast<std::size_t>(std::llround(t / w.dt_ns));
    idx = std::min(idx, w.size() - 1);
    out.samples.push_back(w.samples[idx]);
  }
  return out;
}

struct AdcRange {
  double lo = 0.0;
  double hi = 0.0;
};

inline AdcRange adc_range(const Waveform& calib, const AdcConfig& cfg) {
  require(!calib.empty(), ErrorKind::input, "empty calibration waveform");
  if (cfg.range == RangeMode::min_max) {
    const auto [lo, hi] = std::minmax_element(calib.samples.begin(), calib.samples.end());
    return {*lo, *hi};
  }
  double mean = 0.0;
  for (double v : calib.samples) mean += v;
  mean /= static_cast<double>(calib.size());
  double var = 0.0;
  for (double v : calib.samples) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / static_cast<double>(calib.size()));
  return {mean - cfg.sigma_k * sigma, mean + cfg.sigma_k * sigma};
}

/// Uniform quantizer over the calibration range with round-half-up and
/// clamping. The calibration waveform defaults to the input itself.
inline SymbolSeq quantize(const Waveform& w, const AdcConfig& cfg,
                          const std::optional<Waveform>& calib = std::nullopt) {
  cfg.validate();
  const AdcRange r = adc_range(calib ? *calib : w, cfg);
  require(r.hi > r.lo, ErrorKind::degenerate, "ADC calibration range is degenerate");
  const auto top = static_cast<double>((1u << cfg.bits) - 1u);
  const double scale = top / (r.hi - r.lo);

  SymbolSeq out;
  out.bits = cfg.bits;
  out.codes.reserve(w.size());
  for (double v : w.samples) {
    const double code = std::floor((v - r.lo) * scale + 0.5);
    out.codes.push_back(static_cast<std::uint32_t>(std::clamp(code, 0.0, top)));
  }
  return out;
}

/// Lag difference modulo 2^bits, keeping the `lsb_count` low bits of each
/// difference in the configured order.
inline BitStream diff_lsb(const SymbolSeq& seq, const ExtractorConfig& cfg) {
  cfg.validate(seq.bits);
  require(seq.codes.size() > cfg.shift_samples, ErrorKind::input,
          "symbol sequence shorter than the difference lag");
  const std::uint32_t modulus_mask = (1u << seq.bits) - 1u;
  const auto keep = static_cast<unsigned>(cfg.lsb_count);

  BitStream out;
  out.reserve(key_length(seq.codes.size(), cfg));
  for (std::size_t n = cfg.shift_samples; n < seq.codes.size(); ++n) {
    const std::uint32_t d = (seq.codes[n] - seq.codes[n - cfg.shift_samples]) & modulus_mask;
    for (unsigned j = 0; j < keep; ++j) {
      const unsigned bit = cfg.order == BitOrder::msb_first ? keep - 1 - j : j;
      out.push_back((d >> bit) & 1u);
    }
  }
  return out;
}

/// clock_sample -> quantize (self-calibrated on the clocked samples) -> diff_lsb.
inline BitStream extract_key(const Waveform& w, const AdcConfig& adc, const ExtractorConfig& ext) {
  adc.validate();
  ext.validate(adc.bits);
  const Waveform clocked = clock_sample(w, adc);
  return diff_lsb(quantize(clocked, adc), ext);
}

}  // namespace chaoscipher
