#include <catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "chaoscipher/phy.hpp"

using namespace chaoscipher;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BitStream random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BitStream b;
  b.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.push_back(rng() & 1u);
  return b;
}

Waveform tone(double f_GHz, double dt_ns, std::size_t n, double amp = 1.0, double offset = 0.0) {
  Waveform w{dt_ns, {}};
  for (std::size_t k = 0; k < n; ++k)
    w.samples.push_back(offset + amp * std::sin(2 * std::numbers::pi * f_GHz * dt_ns * static_cast<double>(k)));
  return w;
}

double peak_after(const Waveform& w, std::size_t from) {
  double m = 0.0;
  for (std::size_t k = from; k < w.size(); ++k) m = std::max(m, std::abs(w.samples[k]));
  return m;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
         static_cast<double>(to - from);
}

struct Rails {
  LaserParams laser;
  LinkConfig link;
  double lo = link.low_factor * laser.derived_threshold_mA();
  double hi = link.high_factor * laser.derived_threshold_mA();
};

}  // namespace

TEST_CASE("nrz waveform timing", "[phy][nrz]") {
  const LinkConfig link;
  REQUIRE(link.bit_ns() == 0.2);
  const auto w = nrz_waveform(BitStream::from_string("1111"), 5.0, 0.0, 1.0, 20.0, 2.0);
  REQUIRE(w.size() == 400);
  REQUIRE(w.samples[0] == 0.0);
  REQUIRE(w.samples[5] == 0.5);
  for (std::size_t k = 10; k < w.size(); ++k) REQUIRE(w.samples[k] == 1.0);
}

TEST_CASE("alternating nrz repeats every two bits", "[phy][nrz]") {
  BitStream alt;
  for (int i = 0; i < 20; ++i) alt.push_back(i % 2);
  const auto w = nrz_waveform(alt, 5.0, -1.0, 1.0, 20.0, 1.0);
  const std::size_t period = 400;
  // The first bit has no edge to ramp from, so compare from the second period on.
  for (std::size_t k = period; k + period < w.size(); ++k) REQUIRE(w.samples[k] == w.samples[k + period]);
  REQUIRE(w.samples[100] != w.samples[300]);
}

TEST_CASE("nrz needs a whole number of steps per bit", "[phy][nrz]") {
  REQUIRE_THROWS_AS(nrz_waveform(BitStream(4), 5.0, 0, 1, 20, 3.0), Error);
  REQUIRE_THROWS_AS(nrz_waveform(BitStream(4), 5.0, 0, 1, 20, 40.0), Error);
}

TEST_CASE("modulated laser settles on both rails", "[phy][ld]") {
  const Rails r;
  const auto zeros = modulate_ld(BitStream(40), r.laser, r.link, r.lo, r.hi);
  const auto ones = modulate_ld(BitStream(40).complement(), r.laser, r.link, r.lo, r.hi);
  REQUIRE(zeros.size() == 44 * 100);
  const double s_lo = steady_state(r.laser, r.lo).S_per_um3;
  const double s_hi = steady_state(r.laser, r.hi).S_per_um3;
  for (std::size_t k = 0; k < zeros.size(); ++k) REQUIRE_THAT(zeros.samples[k], WithinRel(s_lo, 0.05));
  for (std::size_t k = 3000; k < 4000; ++k) REQUIRE_THAT(ones.samples[k], WithinRel(s_hi, 0.05));
}

TEST_CASE("a rising edge rings above the high level", "[phy][ld]") {
  const Rails r;
  const auto step = modulate_ld(BitStream::from_string("0011111111111111"), r.laser, r.link, r.lo, r.hi);
  const double s_hi = steady_state(r.laser, r.hi).S_per_um3;
  const double peak = *std::max_element(step.samples.begin(), step.samples.end());
  REQUIRE(peak > 1.01 * s_hi);
}

TEST_CASE("noiseless link recovers the driving bits", "[phy][ld]") {
  const Rails r;
  const auto bits = random_bits(10000, 21);
  const auto timing = calibrate_timing(r.laser, r.link, r.lo, r.hi);
  const auto rx = lowpass(photodetect(modulate_ld(bits, r.laser, r.link, r.lo, r.hi), r.link),
                          r.link.lpf_order, r.link.lpf_cutoff_GHz);
  const auto aligned = align(rx, timing.rx_delay_ns, r.link.bitrate_Gbps, bits.size());
  REQUIRE(sample_decide(aligned, r.link.bitrate_Gbps, 0.5, ThresholdMode::two_cluster) == bits);
}

TEST_CASE("wdm crosstalk", "[phy][wdm]") {
  const auto a = tone(1.0, 0.01, 300);
  const auto b = tone(2.0, 0.01, 300, 0.5, 1.0);
  const auto [a0, b0] = wdm_pair(a, b, 0.0);
  REQUIRE(a0 == a);
  REQUIRE(b0 == b);
  const Waveform dark{0.01, std::vector<double>(300, 0.0)};
  REQUIRE(wdm_pair(a, dark, 1e-2).first == a);
  const auto [x1, x2] = wdm_pair(a, b, 0.05);
  const auto [y1, y2] = wdm_pair(b, a, 0.05);
  REQUIRE(x1 == y2);
  REQUIRE(x2 == y1);
  REQUIRE_THROWS_AS(wdm_pair(a, tone(1.0, 0.01, 299), 0.0), Error);
}

TEST_CASE("photodetector gain and noise", "[phy][pd]") {
  const auto w = tone(1.0, 0.01, 500, 1.0, 2.0);
  LinkConfig link;
  REQUIRE(photodetect(w, link) == w);
  link.pd_responsivity = 2.0;
  const auto twice = photodetect(w, link);
  for (std::size_t k = 0; k < w.size(); ++k) REQUIRE(twice.samples[k] == 2.0 * w.samples[k]);

  link = {};
  link.noise_sigma = 0.1;
  const Waveform dark{0.01, std::vector<double>(1000000, 0.0)};
  const auto noisy = photodetect(dark, link);
  double sq = 0.0, m = 0.0;
  for (double v : noisy.samples) {
    m += v;
    sq += v * v;
  }
  m /= 1e6;
  const double sd = std::sqrt(sq / 1e6 - m * m);
  REQUIRE(sd >= 0.0997);
  REQUIRE(sd <= 0.1003);
  REQUIRE(photodetect(dark, link) == noisy);
}

TEST_CASE("lowpass passes a constant unchanged", "[phy][lpf]") {
  const Waveform c{0.002, std::vector<double>(2000, 3.25)};
  const auto y = lowpass(c, 4, 3.75);
  for (double v : y.samples) REQUIRE_THAT(v, WithinAbs(3.25, 1e-12));
}

TEST_CASE("lowpass is -3 dB at the cutoff", "[phy][lpf]") {
  for (int order : {1, 2, 4, 5}) {
    const auto y = lowpass(tone(3.75, 0.002, 40000), order, 3.75);
    INFO("order " << order);
    REQUIRE_THAT(peak_after(y, 20000), WithinRel(1.0 / std::sqrt(2.0), 0.02));
    REQUIRE_THAT(butterworth_gain(order, 3.75, 0.002, 3.75), WithinAbs(1.0 / std::sqrt(2.0), 1e-12));
  }
}

TEST_CASE("lowpass stopband meets the analog response", "[phy][lpf]") {
  // Analog Butterworth magnitude at ten times the cutoff, order 4: -80 dB.
  const double analog = 1.0 / std::sqrt(1.0 + std::pow(10.0, 8));
  REQUIRE(20 * std::log10(analog) <= -75.0);
  const double digital = butterworth_gain(4, 3.75, 0.002, 37.5);
  REQUIRE(digital <= analog);
  REQUIRE(20 * std::log10(digital) <= -75.0);
  const auto y = lowpass(tone(37.5, 0.002, 40000), 4, 3.75);
  REQUIRE(20 * std::log10(peak_after(y, 20000)) <= -75.0);
}

TEST_CASE("lowpass keeps the mean", "[phy][lpf]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(2.0, 0.5);
  Waveform w{0.002, {}};
  for (int k = 0; k < 200000; ++k) w.samples.push_back(n(rng));
  const auto y = lowpass(w, 4, 3.75);
  REQUIRE_THAT(mean_of(y.samples, 1000, y.size()), WithinRel(mean_of(w.samples, 1000, w.size()), 1e-3));
}

TEST_CASE("sample_decide on clean nrz", "[phy][decide]") {
  const auto bits = random_bits(500, 4);
  const auto w = nrz_waveform(bits, 5.0, 0.2, 1.7, 20.0, 2.0);
  for (auto mode : {ThresholdMode::midpoint, ThresholdMode::two_cluster}) {
    REQUIRE(sample_decide(w, 5.0, 0.5, mode) == bits);
    Waveform scaled = w;
    for (double& v : scaled.samples) v = 3.7 * v - 12.0;
    REQUIRE(sample_decide(scaled, 5.0, 0.5, mode) == bits);
  }
}

TEST_CASE("decision threshold modes", "[phy][decide]") {
  const std::vector<double> s{0.0, 0.0, 0.0, 0.0, 1.0, 10.0, 10.0};
  REQUIRE(decision_threshold(s, ThresholdMode::midpoint) == 5.0);
  // Clusters {0,0,0,0,1} and {10,10}: means 0.2 and 10.
  REQUIRE_THAT(decision_threshold(s, ThresholdMode::two_cluster), WithinAbs(5.1, 1e-12));
  REQUIRE_THROWS_AS(decision_threshold({1.0, 1.0}, ThresholdMode::two_cluster), Error);
}

TEST_CASE("sampling at the bit edge costs errors", "[phy][decide]") {
  const Rails r;
  auto link = r.link;
  link.noise_sigma = 0.02 * steady_state(r.laser, r.hi).S_per_um3;
  const auto bits = random_bits(3000, 6);
  const auto timing = calibrate_timing(r.laser, link, r.lo, r.hi);
  const auto rx = lowpass(photodetect(modulate_ld(bits, r.laser, link, r.lo, r.hi), link),
                          link.lpf_order, link.lpf_cutoff_GHz);
  const auto aligned = align(rx, timing.rx_delay_ns, link.bitrate_Gbps, bits.size());
  const auto centre = ber(bits, sample_decide(aligned, 5.0, 0.5, ThresholdMode::two_cluster)).errors;
  const auto edge = ber(bits, sample_decide(aligned, 5.0, 0.0, ThresholdMode::two_cluster)).errors;
  REQUIRE(edge > centre);
}

TEST_CASE("bit error rate", "[phy][ber]") {
  const auto a = random_bits(100, 1);
  REQUIRE(ber(a, a).errors == 0);
  REQUIRE(ber(a, a).rate == 0.0);
  const auto c = ber(a, a.complement());
  REQUIRE(c.errors == 100);
  REQUIRE(c.rate == 1.0);
  const auto big = random_bits(10000, 2);
  auto one = big;
  one.flip(4321);
  REQUIRE(ber(big, one).errors == 1);
  REQUIRE(ber(big, one).rate == 1e-4);
  REQUIRE_THROWS_AS(ber(a, big), Error);
}

TEST_CASE("eye diagram conservation and structure", "[phy][eye]") {
  const Waveform flat{0.002, std::vector<double>(1000, 0.7)};
  const auto e = eye(flat, 5.0, 50, 20);
  REQUIRE(e.total() == 1000);
  std::size_t rows = 0;
  for (std::size_t a = 0; a < e.amp_bins; ++a) {
    std::uint64_t row = 0;
    for (std::size_t t = 0; t < e.time_bins; ++t) row += e.at(t, a);
    rows += row > 0;
  }
  REQUIRE(rows == 1);

  const auto w = nrz_waveform(random_bits(200, 9), 5.0, 0.0, 1.0, 20.0, 2.0);
  const AmplitudeRange range{-0.1, 1.1};
  const auto whole = eye(w, 5.0, 64, 32, range);
  REQUIRE(whole.total() == w.size());
  const std::size_t half = w.size() / 2;
  Waveform first{w.dt_ns, {w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(half)}};
  Waveform second{w.dt_ns, {w.samples.begin() + static_cast<std::ptrdiff_t>(half), w.samples.end()}};
  auto merged = eye(first, 5.0, 64, 32, range);
  merged += eye(second, 5.0, 64, 32, range, static_cast<double>(half) * w.dt_ns);
  REQUIRE(merged == whole);
}

TEST_CASE("q factor", "[phy][q]") {
  const auto bits = random_bits(1000, 3);
  const auto clean = nrz_waveform(bits, 5.0, 0.0, 1.0, 20.0, 2.0);
  REQUIRE(q_factor(clean, bits, 5.0, 0.5) == q_factor_cap);
  const Waveform flat{0.002, std::vector<double>(clean.size(), 1.0)};
  REQUIRE(q_factor(flat, bits, 5.0, 0.5) == 0.0);

  const auto many = random_bits(10000, 4);
  const double d = 1.0, s = 0.1;
  auto noisy = nrz_waveform(many, 5.0, 0.0, d, 20.0, 20.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, s);
  for (double& v : noisy.samples) v += n(rng);
  REQUIRE_THAT(q_factor(noisy, many, 5.0, 0.5), WithinRel(d / (2 * s), 0.10));
  REQUIRE_THROWS_AS(q_factor(clean, BitStream(1000), 5.0, 0.5), Error);
}

TEST_CASE("delay estimate finds a shifted pattern", "[phy][timing]") {
  const auto bits = random_bits(300, 10);
  const auto w = nrz_waveform(bits, 5.0, 0.0, 1.0, 20.0, 2.0);
  Waveform late{w.dt_ns, std::vector<double>(37, 0.0)};
  late.samples.insert(late.samples.end(), w.samples.begin(), w.samples.end());
  late.samples.resize(late.size() + 400, 0.0);
  const auto tb = bits.prefix(250);
  // Edges are matched at the middle of the 20 ps (10 sample) ramps.
  REQUIRE_THAT(estimate_delay(late, tb, 5.0, 0.8), WithinAbs(42 * w.dt_ns, 1e-12));
  const auto aligned = align(late, 42 * w.dt_ns, 5.0, 250);
  REQUIRE(sample_decide(aligned, 5.0, 0.5, ThresholdMode::midpoint) == tb);
}

TEST_CASE("end to end with a short run", "[phy][e2e]") {
  EndToEndConfig cfg;
  cfg.bits = 2000;
  const auto r = run_end_to_end(cfg);
  REQUIRE(r.report.bits_run == 2000);
  REQUIRE(r.report.errors_plaintext == 0);
  REQUIRE(r.report.ber_key == 0.0);
  REQUIRE(r.report.ber_cipher == 0.0);
  REQUIRE(r.report.q_sampled >= r.report.q_ld_output);
  REQUIRE(r.plaintext_rx == r.plaintext);
  REQUIRE(run_end_to_end(cfg).report == r.report);
}

TEST_CASE("flipped key bits corrupt exactly those plaintext bits", "[phy][e2e]") {
  EndToEndConfig cfg;
  cfg.bits = 1000;
  cfg.key_flips = {3, 250, 999};
  const auto r = run_end_to_end(cfg);
  REQUIRE(r.report.errors_plaintext == 3);
  for (std::size_t i = 0; i < cfg.bits; ++i) {
    const bool flipped = i == 3 || i == 250 || i == 999;
    REQUIRE((r.plaintext_rx[i] != r.plaintext[i]) == flipped);
  }
}

TEST_CASE("heavy receiver noise causes errors", "[phy][e2e]") {
  EndToEndConfig cfg;
  cfg.bits = 1000;
  const LaserParams p;
  const double sep = steady_state(p, cfg.link.high_factor * p.derived_threshold_mA()).S_per_um3 -
                     steady_state(p, cfg.link.low_factor * p.derived_threshold_mA()).S_per_um3;
  // The 3.75 GHz filter removes most of the white noise; this leaves about
  // half the rail separation at the decision point.
  cfg.link.noise_sigma = 4 * sep;
  const auto r = run_end_to_end(cfg);
  REQUIRE(r.report.ber_plaintext > 0.0);
  REQUIRE(run_end_to_end(cfg).report == r.report);
}

TEST_CASE("end to end rejects a key rate that differs from the bitrate", "[phy][e2e]") {
  EndToEndConfig cfg;
  cfg.bits = 100;
  cfg.extractor.lsb_count = 4;
  try {
    (void)run_end_to_end(cfg);
    FAIL("expected a config error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::config);
    REQUIRE(std::string(e.what()).starts_with("config: "));
  }
}
