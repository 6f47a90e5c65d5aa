#pragma once

#include <cstddef>
#include <vector>

namespace chaoscipher {

/// Uniformly sampled real signal. Sample k sits at t = k * dt_ns.
struct Waveform {
  double dt_ns = 0.0;
  std::vector<double> samples;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

  /// Time of the last sample.
  [[nodiscard]] double span_ns() const noexcept {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) * dt_ns;
  }

  double operator[](std::size_t k) const { return samples[k]; }

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

}  // namespace chaoscipher
