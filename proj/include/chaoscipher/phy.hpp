#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/cipher.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/kv.hpp"
#include "chaoscipher/laser.hpp"
#include "chaoscipher/trng.hpp"
#include "chaoscipher/waveform.hpp"

namespace chaoscipher {

enum class ThresholdMode { midpoint, two_cluster };

struct LinkConfig {
  double bitrate_Gbps = 5.0;
  int lpf_order = 4;
  double lpf_cutoff_GHz = 3.75;
  double pd_responsivity = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 1;
  double sample_phase = 0.5;
  ThresholdMode threshold = ThresholdMode::two_cluster;
  double crosstalk = 0.0;

  // Transmitter drive, in multiples of the derived threshold current.
  double low_factor = 1.2;
  double high_factor = 2.5;
  double rise_ps = 20.0;
  double dt_ps = 0.5;             // laser integration step
  std::size_t record_every = 4;   // optical waveform step = dt_ps * record_every
  std::size_t preamble_bits = 64;
  std::size_t guard_bits = 4;     // idle bits kept after the data for receiver latency

  [[nodiscard]] double bit_ns() const { return 1.0 / bitrate_Gbps; }
  [[nodiscard]] double waveform_dt_ns() const {
    return dt_ps * 1e-3 * static_cast<double>(record_every);
  }

  void validate() const {
    require(bitrate_Gbps > 0 && std::isfinite(bitrate_Gbps), ErrorKind::config,
            "bitrate must be positive");
    require(lpf_order >= 1 && lpf_order <= 16, ErrorKind::config, "LPF order must be 1..16");
    require(lpf_cutoff_GHz > 0 && lpf_cutoff_GHz < 0.5 / waveform_dt_ns(), ErrorKind::config,
            "LPF cutoff must lie between 0 and the Nyquist frequency");
    require(pd_responsivity > 0, ErrorKind::config, "photodetector responsivity must be positive");
    require(noise_sigma >= 0, ErrorKind::config, "noise sigma must be non-negative");
    require(sample_phase >= 0 && sample_phase < 1, ErrorKind::config,
            "sample phase must lie in [0, 1)");
    require(crosstalk >= 0 && crosstalk < 1, ErrorKind::config, "crosstalk must lie in [0, 1)");
    require(high_factor > low_factor && low_factor >= 0, ErrorKind::config,
            "drive levels need high > low >= 0");
    require(rise_ps >= 0 && rise_ps * 1e-3 < bit_ns(), ErrorKind::config,
            "rise time must be shorter than a bit");
    require(record_every >= 1, ErrorKind::config, "record_every must be at least 1");
  }
};

namespace detail {

/// Number of grid steps of size `dt` in one bit; the ratio must be integral.
inline std::size_t samples_per_bit(double bit_ns, double dt_ns) {
  const double ratio = bit_ns / dt_ns;
  const double rounded = std::round(ratio);
  require(rounded >= 1 && std::abs(ratio - rounded) <= 1e-6 * ratio, ErrorKind::config,
          "bit period must be an integer number of waveform steps");
  return static_cast<std::size_t>(rounded);
}

inline std::vector<double> decision_samples(const Waveform& w, double bitrate_Gbps, double phase,
                                            std::size_t nbits) {
  const double bit_ns = 1.0 / bitrate_Gbps;
  std::vector<double> out;
  out.reserve(nbits);
  for (std::size_t k = 0; k < nbits; ++k) {
    const double t = (static_cast<double>(k) + phase) * bit_ns;
    auto idx = static_cast<std::size_t>(std::llround(t / w.dt_ns));
    out.push_back(w.samples[std::min(idx, w.size() - 1)]);
  }
  return out;
}

inline std::size_t whole_bits(const Waveform& w, double bitrate_Gbps) {
  require(!w.empty() && w.dt_ns > 0, ErrorKind::input, "empty waveform");
  const double bits = static_cast<double>(w.size()) * w.dt_ns * bitrate_Gbps;
  const double rounded = std::round(bits);
  require(rounded >= 1 && std::abs(bits - rounded) <= 1e-6 * std::max(1.0, bits),
          ErrorKind::input, "waveform must span a whole number of bit periods");
  return static_cast<std::size_t>(rounded);
}

}  // namespace detail

/// NRZ line signal: `hi` during ones, `lo` during zeros, linear ramps of
/// `rise_ps` at each change. The line is at `lo` before the first bit.
inline Waveform nrz_waveform(const BitStream& bits, double bitrate_Gbps, double lo, double hi,
                             double rise_ps, double dt_ps) {
  require(bitrate_Gbps > 0, ErrorKind::config, "bitrate must be positive");
  const double bit_ns = 1.0 / bitrate_Gbps;
  const double dt_ns = dt_ps * 1e-3;
  require(dt_ns > 0 && dt_ns <= bit_ns / 10.0 * (1.0 + 1e-12), ErrorKind::config,
          "waveform step must be at most a tenth of a bit");
  require(rise_ps >= 0 && rise_ps * 1e-3 < bit_ns, ErrorKind::config,
          "rise time must be shorter than a bit");
  const std::size_t spb = detail::samples_per_bit(bit_ns, dt_ns);
  const double rise_ns = rise_ps * 1e-3;

  Waveform w;
  w.dt_ns = dt_ns;
  w.samples.resize(bits.size() * spb);
  for (std::size_t k = 0; k < bits.size(); ++k) {
    const bool cur = bits[k];
    const bool prev = k > 0 && bits[k - 1];
    const double target = cur ? hi : lo;
    const double from = prev ? hi : lo;
    for (std::size_t j = 0; j < spb; ++j) {
      const double into = static_cast<double>(j) * dt_ns;
      double v = target;
      if (cur != prev && into < rise_ns) v = from + (target - from) * (into / rise_ns);
      w.samples[k * spb + j] = v;
    }
  }
  return w;
}

/// Optical output of a solitary LD driven by NRZ current. A preamble of zeros
/// settles the laser and is cut off. The result covers the data bits followed
/// by `link.guard_bits` idle (low-current) bit periods.
inline Waveform modulate_ld(const BitStream& bits, const LaserParams& params,
                            const LinkConfig& link, double low_mA, double high_mA) {
  link.validate();
  require(high_mA > low_mA && low_mA >= 0, ErrorKind::config, "drive levels need high > low >= 0");
  require(!bits.empty(), ErrorKind::input, "no bits to modulate");
  const double bit_ns = link.bit_ns();
  const std::size_t spb = detail::samples_per_bit(bit_ns, link.waveform_dt_ns());

  NrzDrive drive{low_mA, high_mA, link.bitrate_Gbps, link.rise_ps, BitStream(link.preamble_bits)};
  BitStream& all = drive.bits;
  all.reserve(link.preamble_bits + bits.size() + link.guard_bits);
  for (std::size_t i = 0; i < bits.size(); ++i) all.push_back(bits[i]);
  for (std::size_t i = 0; i < link.guard_bits; ++i) all.push_back(false);

  const auto ss = steady_state(params, low_mA);
  const InitialState init{std::complex<double>(std::sqrt(std::max(ss.S_per_um3, 1e-6)), 0.0),
                          ss.N_per_um3};
  const std::size_t total = all.size() * spb;
  const StepConfig steps{static_cast<double>(total) * link.waveform_dt_ns(), link.dt_ps,
                         link.record_every};
  const FieldTrace trace = integrate_solitary(params, drive, steps, init);
  require(trace.size() >= total, ErrorKind::divergence, "laser trace shorter than expected");

  Waveform power = intensity(trace);
  const auto first = static_cast<std::ptrdiff_t>(link.preamble_bits * spb);
  Waveform out;
  out.dt_ns = power.dt_ns;
  out.samples.assign(power.samples.begin() + first,
                     power.samples.begin() + static_cast<std::ptrdiff_t>(total));
  return out;
}

/// Composite MUX + DMUX leakage between two wavelength channels.
inline std::pair<Waveform, Waveform> wdm_pair(const Waveform& ch1, const Waveform& ch2,
                                              double crosstalk) {
  require(ch1.size() == ch2.size() && ch1.dt_ns == ch2.dt_ns, ErrorKind::input,
          "WDM channels must share step and length");
  require(crosstalk >= 0 && crosstalk < 1, ErrorKind::config, "crosstalk must lie in [0, 1)");
  std::pair<Waveform, Waveform> out{ch1, ch2};
  if (crosstalk == 0.0) return out;
  for (std::size_t k = 0; k < ch1.size(); ++k) {
    out.first.samples[k] += crosstalk * ch2.samples[k];
    out.second.samples[k] += crosstalk * ch1.samples[k];
  }
  return out;
}

/// Responsivity times optical power plus seeded white Gaussian noise.
inline Waveform photodetect(const Waveform& p, const LinkConfig& link) {
  Waveform v = p;
  for (double& s : v.samples) s *= link.pd_responsivity;
  if (link.noise_sigma > 0) {
    std::mt19937_64 rng(link.noise_seed);
    std::normal_distribution<double> noise(0.0, link.noise_sigma);
    for (double& s : v.samples) s += noise(rng);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass

/// One second-order (or first-order, b2 = a2 = 0) section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Bilinear-transform Butterworth low-pass as cascaded sections, prewarped so
/// the -3 dB point falls exactly on `cutoff_GHz`.
inline std::vector<Biquad> butterworth_sections(int order, double cutoff_GHz, double dt_ns) {
  require(order >= 1, ErrorKind::config, "filter order must be positive");
  require(dt_ns > 0 && cutoff_GHz > 0 && cutoff_GHz < 0.5 / dt_ns, ErrorKind::config,
          "cutoff must lie strictly between 0 and the Nyquist frequency");
  const double K = std::tan(std::numbers::pi * cutoff_GHz * dt_ns);
  const double K2 = K * K;
  std::vector<Biquad> sections;
  for (int k = 0; k < order / 2; ++k) {
    // Conjugate pole pair of the unit-cutoff prototype at angle theta from the jw axis.
    const double theta = std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order);
    const double damp = 2.0 * std::sin(theta);
    const double a0 = 1.0 + damp * K + K2;
    sections.push_back({K2 / a0, 2.0 * K2 / a0, K2 / a0, (2.0 * K2 - 2.0) / a0,
                        (1.0 - damp * K + K2) / a0});
  }
  if (order % 2 == 1) {
    const double a0 = 1.0 + K;
    sections.push_back({K / a0, K / a0, 0.0, (K - 1.0) / a0, 0.0});
  }
  return sections;
}

/// Magnitude response of the discretized filter at frequency f.
inline double butterworth_gain(int order, double cutoff_GHz, double dt_ns, double f_GHz) {
  const auto sections = butterworth_sections(order, cutoff_GHz, dt_ns);
  const std::complex<double> zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_GHz * dt_ns);
  std::complex<double> h = 1.0;
  for (const auto& s : sections)
    h *= (s.b0 + s.b1 * zinv + s.b2 * zinv * zinv) / (1.0 + s.a1 * zinv + s.a2 * zinv * zinv);
  return std::abs(h);
}

/// Causal Butterworth low-pass. Filter state starts at the equilibrium for the
/// first input sample, so a constant input passes through unchanged.
inline Waveform lowpass(const Waveform& w, int order, double cutoff_GHz) {
  require(!w.empty(), ErrorKind::input, "empty waveform");
  const auto sections = butterworth_sections(order, cutoff_GHz, w.dt_ns);
  Waveform y = w;
  for (const auto& s : sections) {
    // Transposed direct form II at steady state for input x0 (unit DC gain).
    const double x0 = y.samples.front();
    double z2 = (s.b2 - s.a2) * x0;
    double z1 = (s.b1 - s.a1) * x0 + z2;
    for (double& v : y.samples) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Decisions and quality metrics

/// Decision threshold over the decision-instant samples.
inline double decision_threshold(const std::vector<double>& samples, ThresholdMode mode) {
  require(!samples.empty(), ErrorKind::input, "no decision samples");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  double thr = 0.5 * (lo + hi);
  if (mode == ThresholdMode::midpoint) return thr;

  require(hi > lo, ErrorKind::degenerate, "two-cluster threshold needs two distinct levels");
  for (int iter = 0; iter < 200; ++iter) {
    double s0 = 0, s1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (double v : samples) {
      if (v >= thr) {
        s1 += v;
        ++n1;
      } else {
        s0 += v;
        ++n0;
      }
    }
    const double next = 0.5 * (s0 / static_cast<double>(n0) + s1 / static_cast<double>(n1));
    if (next == thr) break;
    thr = next;
  }
  return thr;
}

/// One decision per bit at t = (k + phase) Tbit; a bit is 1 iff its sample is at
/// or above the threshold.
inline BitStream sample_decide(const Waveform& w, double bitrate_Gbps, double phase,
                               ThresholdMode mode) {
  require(phase >= 0 && phase < 1, ErrorKind::config, "sample phase must lie in [0, 1)");
  const std::size_t nbits = detail::whole_bits(w, bitrate_Gbps);
  const auto samples = detail::decision_samples(w, bitrate_Gbps, phase, nbits);
  const double thr = decision_threshold(samples, mode);
  BitStream out;
  out.reserve(nbits);
  for (double v : samples) out.push_back(v >= thr);
  return out;
}

struct BerResult {
  std::size_t errors = 0;
  double rate = 0.0;
};

inline BerResult ber(const BitStream& a, const BitStream& b) {
  require(a.size() == b.size(), ErrorKind::input, "BER needs streams of equal length");
  const auto& pa = a.packed();
  const auto& pb = b.packed();
  std::size_t errors = 0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    errors += static_cast<std::size_t>(std::popcount(static_cast<std::uint8_t>(pa[i] ^ pb[i])));
  return {errors, a.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(a.size())};
}

inline constexpr double q_factor_cap = 1e6;

/// Q = (mu1 - mu0)/(sigma1 + sigma0) over decision samples split by the true bit.
inline double q_factor(const Waveform& w, const BitStream& truth, double bitrate_Gbps,
                       double phase) {
  const std::size_t nbits = detail::whole_bits(w, bitrate_Gbps);
  require(truth.size() == nbits, ErrorKind::input, "truth length differs from waveform bit count");
  const auto samples = detail::decision_samples(w, bitrate_Gbps, phase, nbits);
  double sum[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (std::size_t k = 0; k < nbits; ++k) {
    sum[truth[k]] += samples[k];
    ++n[truth[k]];
  }
  require(n[0] > 0 && n[1] > 0, ErrorKind::input, "Q-factor needs both bit classes");
  const double mu[2] = {sum[0] / static_cast<double>(n[0]), sum[1] / static_cast<double>(n[1])};
  double var[2] = {0, 0};
  for (std::size_t k = 0; k < nbits; ++k) {
    const double d = samples[k] - mu[truth[k]];
    var[truth[k]] += d * d;
  }
  if (mu[1] == mu[0]) return 0.0;
  const double spread = std::sqrt(var[0] / static_cast<double>(n[0])) +
                        std::sqrt(var[1] / static_cast<double>(n[1]));
  if (spread <= std::numeric_limits<double>::min()) return q_factor_cap;
  return std::min((mu[1] - mu[0]) / spread, q_factor_cap);
}

// ---------------------------------------------------------------------------
// Receiver timing

/// Latency (a whole number of waveform steps in [0, max_delay_ns]) that best
/// aligns `w` with the NRZ pattern of `truth`, by cross-correlation.
inline double estimate_delay(const Waveform& w, const BitStream& truth, double bitrate_Gbps,
                             double max_delay_ns) {
  require(!truth.empty(), ErrorKind::input, "no reference bits");
  const std::size_t spb = detail::samples_per_bit(1.0 / bitrate_Gbps, w.dt_ns);
  const std::size_t span = truth.size() * spb;
  const auto max_lag = static_cast<std::size_t>(std::floor(max_delay_ns / w.dt_ns + 1e-9));
  require(w.size() >= span + max_lag, ErrorKind::input, "waveform too short for delay search");

  double mean = 0.0;
  for (double v : w.samples) mean += v;
  mean /= static_cast<double>(w.size());

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_lag = 0;
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i < span; ++i) {
      const double v = w.samples[i + lag] - mean;
      acc += truth[i / spb] ? v : -v;
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return static_cast<double>(best_lag) * w.dt_ns;
}

/// The `nbits` bit periods of `w` starting `delay_ns` after its first sample.
inline Waveform align(const Waveform& w, double delay_ns, double bitrate_Gbps, std::size_t nbits) {
  const std::size_t spb = detail::samples_per_bit(1.0 / bitrate_Gbps, w.dt_ns);
  const auto first = static_cast<std::size_t>(std::llround(delay_ns / w.dt_ns));
  require(delay_ns >= 0 && first + nbits * spb <= w.size(), ErrorKind::input,
          "aligned window runs past the end of the waveform");
  Waveform out;
  out.dt_ns = w.dt_ns;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(first),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(first + nbits * spb));
  return out;
}

/// Fixed latencies of the transmitter and of the full receive chain.
struct LinkTiming {
  double ld_delay_ns = 0.0;  // drive current to optical output
  double rx_delay_ns = 0.0;  // drive current to post-LPF signal
};

/// Measures the link latencies once with a known PRBS7 training burst through a
/// noiseless copy of the link. Stands in for an ideal shared sampling clock.
inline LinkTiming calibrate_timing(const LaserParams& params, const LinkConfig& link,
                                   double low_mA, double high_mA) {
  LinkConfig quiet = link;
  quiet.noise_sigma = 0.0;
  quiet.crosstalk = 0.0;
  const double max_delay = static_cast<double>(quiet.guard_bits) * quiet.bit_ns();
  const BitStream training = prbs(PrbsConfig::maximal(7, 1), 2 * 127);
  const Waveform optical = modulate_ld(training, params, quiet, low_mA, high_mA);
  const Waveform rx = lowpass(photodetect(optical, quiet), quiet.lpf_order, quiet.lpf_cutoff_GHz);
  return {estimate_delay(optical, training, quiet.bitrate_Gbps, max_delay),
          estimate_delay(rx, training, quiet.bitrate_Gbps, max_delay)};
}

// ---------------------------------------------------------------------------
// Eye diagram

/// Occupancy histogram of a waveform folded modulo two bit periods.
struct EyeDiagram {
  std::size_t time_bins = 0;
  std::size_t amp_bins = 0;
  double amp_lo = 0.0;
  double amp_hi = 0.0;
  std::vector<std::uint64_t> counts;  // row-major, amplitude bin * time_bins + time bin

  [[nodiscard]] std::uint64_t at(std::size_t time_bin, std::size_t amp_bin) const {
    return counts[amp_bin * time_bins + time_bin];
  }

  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  EyeDiagram& operator+=(const EyeDiagram& other) {
    require(time_bins == other.time_bins && amp_bins == other.amp_bins &&
                amp_lo == other.amp_lo && amp_hi == other.amp_hi,
            ErrorKind::input, "eye diagrams use different binning");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
  }

  friend bool operator==(const EyeDiagram&, const EyeDiagram&) = default;
};

struct AmplitudeRange {
  double lo;
  double hi;
};

/// Folds every sample at (t0 + k dt) mod 2 Tbit. Amplitudes outside the range
/// land in the edge rows. Without an explicit range the waveform's own
/// min/max is used.
inline EyeDiagram eye(const Waveform& w, double bitrate_Gbps, std::size_t time_bins,
                      std::size_t amp_bins, std::optional<AmplitudeRange> range = std::nullopt,
                      double t0_ns = 0.0) {
  require(!w.empty(), ErrorKind::input, "empty waveform");
  require(time_bins >= 1 && amp_bins >= 1, ErrorKind::config, "eye needs at least one bin per axis");
  require(bitrate_Gbps > 0, ErrorKind::config, "bitrate must be positive");
  AmplitudeRange r{};
  if (range) {
    r = *range;
  } else {
    const auto [lo, hi] = std::minmax_element(w.samples.begin(), w.samples.end());
    r = {*lo, *hi};
  }
  if (!(r.hi > r.lo)) r = {r.lo - 0.5, r.lo + 0.5};

  EyeDiagram e{time_bins, amp_bins, r.lo, r.hi, std::vector<std::uint64_t>(time_bins * amp_bins, 0)};
  const double fold = 2.0 / bitrate_Gbps;
  const double amp_scale = static_cast<double>(amp_bins) / (r.hi - r.lo);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double t = t0_ns + static_cast<double>(k) * w.dt_ns;
    double phase = std::fmod(t, fold) / fold;
    if (phase < 0) phase += 1.0;
    // The nudge keeps samples that sit on a bin edge in the same bin whatever
    // the rounding of t.
    auto tb = static_cast<std::size_t>(phase * static_cast<double>(time_bins) + 1e-6);
    if (tb >= time_bins) tb = 0;
    const double a = std::floor((w.samples[k] - r.lo) * amp_scale);
    const auto ab = static_cast<std::size_t>(std::clamp(a, 0.0, static_cast<double>(amp_bins - 1)));
    ++e.counts[ab * time_bins + tb];
  }
  return e;
}

// ---------------------------------------------------------------------------
// End-to-end back-to-back link

struct LinkReport {
  double ber_key = 0.0;
  double ber_cipher = 0.0;
  double ber_plaintext = 0.0;
  std::size_t errors_plaintext = 0;
  double q_ld_output = 0.0;
  double q_sampled = 0.0;
  std::size_t bits_run = 0;
  LinkTiming timing;

  [[nodiscard]] KeyValues to_kv() const {
    KeyValues kv;
    kv.add("bitsRun", bits_run);
    kv.add("berKey", ber_key);
    kv.add("berCipher", ber_cipher);
    kv.add("berPlaintext", ber_plaintext);
    kv.add("errorsPlaintext", errors_plaintext);
    kv.add("qLdOutput", q_ld_output);
    kv.add("qSampled", q_sampled);
    kv.add("ldDelay_ns", timing.ld_delay_ns);
    kv.add("rxDelay_ns", timing.rx_delay_ns);
    return kv;
  }

  friend bool operator==(const LinkReport& a, const LinkReport& b) {
    return a.to_kv().to_string() == b.to_kv().to_string();
  }
};

struct EndToEndConfig {
  LaserParams laser{};
  ChaosConfig chaos = [] {
    ChaosConfig c;
    c.record_every = 500;  // 10 GHz intensity record at dt = 0.2 ps
    return c;
  }();
  AdcConfig adc{};
  ExtractorConfig extractor{};
  PrbsConfig prbs{};
  LinkConfig link{};
  std::size_t bits = 10000;
  std::vector<std::size_t> key_flips;  // positions flipped in Bob's key before the final XOR
};

/// Every intermediate product of one run, for reporting and plotting. Optical
/// and received waveforms are aligned to the bit grid (latency removed).
struct EndToEndResult {
  LinkReport report;
  Waveform chaos;        // chaotic intensity
  BitStream key;         // Alice's key, truncated to the plaintext length
  BitStream plaintext;
  BitStream ciphertext;
  Waveform ld_key;       // LD1 optical output
  Waveform ld_cipher;    // LD2 optical output
  Waveform rx_key;       // after WDM, PD and LPF
  Waveform rx_cipher;
  BitStream key_rx;
  BitStream cipher_rx;
  BitStream plaintext_rx;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.tagged(name);
  }
}

}  // namespace detail

/// Chaos -> key -> XOR -> LD1/LD2 -> WDM -> PD -> LPF -> decide -> XOR -> BER.
inline EndToEndResult run_end_to_end(const EndToEndConfig& cfg) {
  const LinkConfig& link = cfg.link;
  detail::stage("config", [&] {
    require(cfg.bits > 0, ErrorKind::config, "bit count must be positive");
    link.validate();
    cfg.adc.validate();
    cfg.extractor.validate(cfg.adc.bits);
    require(std::abs(key_rate_Gbps(cfg.adc, cfg.extractor) - link.bitrate_Gbps) <=
                1e-9 * link.bitrate_Gbps,
            ErrorKind::config, "key rate must equal the plaintext bitrate");
    return 0;
  });

  EndToEndResult r;

  // Enough clocked samples for `bits` key bits.
  const auto lsb = static_cast<std::size_t>(cfg.extractor.lsb_count);
  const std::size_t clocked = (cfg.bits + lsb - 1) / lsb + cfg.extractor.shift_samples;
  ChaosConfig chaos = cfg.chaos;
  chaos.duration_ns = cfg.adc.phase_ns + static_cast<double>(clocked - 1) / cfg.adc.clock_GHz;
  r.chaos = detail::stage("chaos", [&] { return intensity(chaotic_trace(cfg.laser, chaos)); });

  r.key = detail::stage("keygen", [&] {
    return extract_key(r.chaos, cfg.adc, cfg.extractor).prefix(cfg.bits);
  });
  r.plaintext = detail::stage("plaintext", [&] { return prbs(cfg.prbs, cfg.bits); });
  r.ciphertext = detail::stage("encrypt", [&] { return xor_stream(r.plaintext, r.key); });

  const double ith = cfg.laser.derived_threshold_mA();
  const double lo = link.low_factor * ith;
  const double hi = link.high_factor * ith;
  const LinkTiming timing =
      detail::stage("timing", [&] { return calibrate_timing(cfg.laser, link, lo, hi); });

  const Waveform opt1 = detail::stage("ld1", [&] { return modulate_ld(r.key, cfg.laser, link, lo, hi); });
  const Waveform opt2 =
      detail::stage("ld2", [&] { return modulate_ld(r.ciphertext, cfg.laser, link, lo, hi); });

  const auto [fiber1, fiber2] = detail::stage("wdm", [&] { return wdm_pair(opt1, opt2, link.crosstalk); });

  LinkConfig pd1 = link;
  LinkConfig pd2 = link;
  pd2.noise_seed = link.noise_seed + 1;
  const Waveform filt1 = detail::stage("rx-key", [&] {
    return lowpass(photodetect(fiber1, pd1), link.lpf_order, link.lpf_cutoff_GHz);
  });
  const Waveform filt2 = detail::stage("rx-cipher", [&] {
    return lowpass(photodetect(fiber2, pd2), link.lpf_order, link.lpf_cutoff_GHz);
  });

  detail::stage("align", [&] {
    r.ld_key = align(opt1, timing.ld_delay_ns, link.bitrate_Gbps, cfg.bits);
    r.ld_cipher = align(opt2, timing.ld_delay_ns, link.bitrate_Gbps, cfg.bits);
    r.rx_key = align(filt1, timing.rx_delay_ns, link.bitrate_Gbps, cfg.bits);
    r.rx_cipher = align(filt2, timing.rx_delay_ns, link.bitrate_Gbps, cfg.bits);
    return 0;
  });

  r.key_rx = detail::stage("decide-key", [&] {
    return sample_decide(r.rx_key, link.bitrate_Gbps, link.sample_phase, link.threshold);
  });
  r.cipher_rx = detail::stage("decide-cipher", [&] {
    return sample_decide(r.rx_cipher, link.bitrate_Gbps, link.sample_phase, link.threshold);
  });

  BitStream bob_key = r.key_rx;
  for (auto pos : cfg.key_flips) {
    require(pos < bob_key.size(), ErrorKind::config, "key flip position out of range");
    bob_key.flip(pos);
  }
  r.plaintext_rx = detail::stage("decrypt", [&] { return xor_stream(r.cipher_rx, bob_key); });

  const auto key_err = ber(r.key, r.key_rx);
  const auto cipher_err = ber(r.ciphertext, r.cipher_rx);
  const auto plain_err = ber(r.plaintext, r.plaintext_rx);
  r.report.bits_run = cfg.bits;
  r.report.ber_key = key_err.rate;
  r.report.ber_cipher = cipher_err.rate;
  r.report.ber_plaintext = plain_err.rate;
  r.report.errors_plaintext = plain_err.errors;
  r.report.timing = timing;
  r.report.q_ld_output = detail::stage("q", [&] {
    return q_factor(r.ld_cipher, r.ciphertext, link.bitrate_Gbps, link.sample_phase);
  });
  r.report.q_sampled = detail::stage("q", [&] {
    return q_factor(r.rx_cipher, r.ciphertext, link.bitrate_Gbps, link.sample_phase);
  });
  return r;
}

}  // namespace chaoscipher
