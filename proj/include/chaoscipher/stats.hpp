#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/kv.hpp"

// Minimal randomness battery for extracted key streams: frequency (monobit),
// runs, lag autocorrelation and k-bit symbol entropy. Normal approximations
// throughout; decisions at significance 0.01.

namespace chaoscipher::stats {

inline constexpr double significance = 0.01;
inline constexpr std::size_t min_bits = 100;

struct MonobitResult {
  double z = 0.0;
  double p = 0.0;
};

/// z = (2 ones - n)/sqrt(n), p = erfc(|z|/sqrt 2).
inline MonobitResult monobit(const BitStream& bits) {
  require(bits.size() >= min_bits, ErrorKind::input, "monobit test needs at least 100 bits");
  const auto n = static_cast<double>(bits.size());
  const double z = (2.0 * static_cast<double>(bits.count_ones()) - n) / std::sqrt(n);
  return {z, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

struct RunsResult {
  bool applicable = false;  // false when the ones proportion fails the prefilter
  std::size_t runs = 0;
  double z = 0.0;
  double p = 0.0;
};

inline std::size_t count_runs(const BitStream& bits) {
  if (bits.empty()) return 0;
  std::size_t runs = 1;
  for (std::size_t i = 1; i < bits.size(); ++i) runs += bits[i] != bits[i - 1];
  return runs;
}

/// Total number of runs against 2 n pi (1 - pi), pi the ones proportion.
inline RunsResult runs(const BitStream& bits) {
  require(bits.size() >= min_bits, ErrorKind::input, "runs test needs at least 100 bits");
  const auto n = static_cast<double>(bits.size());
  const double pi = static_cast<double>(bits.count_ones()) / n;
  RunsResult r;
  r.runs = count_runs(bits);
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(n)) return r;
  r.applicable = true;
  const double spread = pi * (1.0 - pi);
  r.z = (static_cast<double>(r.runs) - 2.0 * n * spread) / (2.0 * std::sqrt(n) * spread);
  r.p = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

/// Pearson correlation between b[i] and b[i + lag].
inline double autocorr(const BitStream& bits, std::size_t lag) {
  require(bits.size() > lag + 1, ErrorKind::input, "stream too short for the requested lag");
  const std::size_t m = bits.size() - lag;
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = bits[i];
    const double y = bits[i + lag];
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const auto md = static_cast<double>(m);
  const double cov = sxy - sx * sy / md;
  const double vx = sxx - sx * sx / md;
  const double vy = syy - sy * sy / md;
  require(vx > 0 && vy > 0, ErrorKind::degenerate, "autocorrelation undefined for a constant stream");
  return cov / std::sqrt(vx * vy);
}

/// Empirical Shannon entropy (bits per symbol) of non-overlapping k-bit symbols,
/// read MSB-first. A partial trailing symbol is dropped.
inline double symbol_entropy(const BitStream& bits, int k = 5) {
  require(k >= 1 && k <= 16, ErrorKind::config, "symbol width must be 1..16");
  const std::size_t alphabet = std::size_t{1} << k;
  require(bits.size() >= 100 * alphabet, ErrorKind::input,
          "entropy estimate needs at least 100 * 2^k bits");
  const std::size_t symbols = bits.size() / static_cast<std::size_t>(k);
  std::vector<std::size_t> counts(alphabet, 0);
  for (std::size_t s = 0; s < symbols; ++s) {
    std::size_t v = 0;
    for (int j = 0; j < k; ++j) v = (v << 1) | (bits[s * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)] ? 1u : 0u);
    ++counts[v];
  }
  double h = 0.0;
  const auto total = static_cast<double>(symbols);
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;  // normalizes -0.0
}

struct TestOutcome {
  double statistic = 0.0;
  std::optional<double> p;
  bool pass = false;
  std::string note;  // "not-applicable" or the error text when the test could not run
};

struct TestReport {
  std::size_t bits = 0;
  TestOutcome monobit;
  TestOutcome runs;
  TestOutcome autocorr_lag1;
  TestOutcome entropy;
  int symbol_width = 5;

  [[nodiscard]] bool all_pass() const {
    return monobit.pass && runs.pass && autocorr_lag1.pass && entropy.pass;
  }

  [[nodiscard]] KeyValues to_kv() const {
    KeyValues kv;
    kv.add("bits", bits);
    const auto put = [&kv](const std::string& name, const TestOutcome& t) {
      kv.add(name + ".statistic", t.statistic);
      if (t.p) kv.add(name + ".p", *t.p);
      kv.add(name + ".pass", t.pass);
      if (!t.note.empty()) kv.add(name + ".note", t.note);
    };
    put("monobit", monobit);
    put("runs", runs);
    put("autocorr_lag1", autocorr_lag1);
    kv.add("entropy.symbol_width", symbol_width);
    put("entropy", entropy);
    kv.add("all_pass", all_pass());
    return kv;
  }
};

/// Entropy pass level: 98% of the maximum k bits per symbol.
inline double entropy_pass_level(int k) { return 0.98 * k; }

/// Runs the whole battery. Individual test failures to run are recorded in the
/// outcome note and counted as not passing.
inline TestReport full_report(const BitStream& bits, int symbol_width = 5) {
  TestReport rep;
  rep.bits = bits.size();
  rep.symbol_width = symbol_width;

  try {
    const auto m = monobit(bits);
    rep.monobit = {m.z, m.p, m.p >= significance, {}};
  } catch (const Error& e) {
    rep.monobit.note = e.what();
  }

  try {
    const auto r = runs(bits);
    rep.runs.statistic = static_cast<double>(r.runs);
    if (r.applicable) {
      rep.runs.p = r.p;
      rep.runs.pass = r.p >= significance;
    } else {
      rep.runs.note = "not-applicable";
    }
  } catch (const Error& e) {
    rep.runs.note = e.what();
  }

  try {
    const double r = autocorr(bits, 1);
    const double n = static_cast<double>(bits.size() - 1);
    const double p = std::erfc(std::abs(r) * std::sqrt(n) / std::sqrt(2.0));
    rep.autocorr_lag1 = {r, p, p >= significance, {}};
  } catch (const Error& e) {
    rep.autocorr_lag1.note = e.what();
  }

  try {
    const double h = symbol_entropy(bits, symbol_width);
    rep.entropy = {h, std::nullopt, h >= entropy_pass_level(symbol_width), {}};
  } catch (const Error& e) {
    rep.entropy.note = e.what();
  }
  return rep;
}

}  // namespace chaoscipher::stats
