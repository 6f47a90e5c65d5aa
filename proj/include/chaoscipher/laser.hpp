#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "chaoscipher/bitstream.hpp"
#include "chaoscipher/error.hpp"
#include "chaoscipher/waveform.hpp"

// Single-mode semiconductor laser rate equations for the complex field E and
// carrier density N, solitary or with delayed optical feedback:
//
//   dE/dt = (1 + i alpha)/2 [G(N, |E|^2) - 1/tauP] E + (kappa/tauIn) e^{-i phi0} E(t - tauF)
//   dN/dt = I/(qV) - N/tauN - G(N, |E|^2) |E|^2
//   G     = g (N - N0) / (1 + eps |E|^2)
//
// Internal units: time in ns, densities in um^-3, |E|^2 is photon density in
// um^-3, currents in mA.

namespace chaoscipher {

inline constexpr double elementary_charge_C = 1.602176634e-19;

struct LaserParams {
  double wavelength_nm = 1550.0;
  double N0_per_um3 = 0.4e6;          // transparency carrier density
  double gain_um3_per_ns = 2.125e-3;  // differential gain
  double tauN_ns = 2.0;               // carrier lifetime
  double tauP_ps = 2.0;               // photon lifetime
  double tauIn_ps = 9.0;              // intracavity round trip
  double alpha = 5.5;                 // linewidth enhancement factor
  double eps_um3 = 3e-5;              // gain saturation
  double volume_um3 = 150.0;          // active volume
  double Ith_nominal_mA = 12.0;       // label only, not used by the physics

  void validate() const {
    const bool positive = wavelength_nm > 0 && N0_per_um3 > 0 && gain_um3_per_ns > 0 &&
                          tauN_ns > 0 && tauP_ps > 0 && tauIn_ps > 0 && eps_um3 > 0 &&
                          volume_um3 > 0;
    require(positive && std::isfinite(alpha), ErrorKind::config,
            "laser parameters must be finite and strictly positive");
  }

  [[nodiscard]] double tauP_ns() const noexcept { return tauP_ps * 1e-3; }
  [[nodiscard]] double tauIn_ns() const noexcept { return tauIn_ps * 1e-3; }

  /// Carrier density at which modal gain balances cavity loss.
  [[nodiscard]] double threshold_density() const noexcept {
    return N0_per_um3 + 1.0 / (gain_um3_per_ns * tauP_ns());
  }

  /// Carrier injection rate I/(qV) in um^-3 ns^-1 for a current in mA.
  [[nodiscard]] double pump_rate(double current_mA) const noexcept {
    return current_mA * 1e-12 / (elementary_charge_C * volume_um3);
  }

  /// Threshold current implied by the parameter set, q V Nth / tauN.
  [[nodiscard]] double derived_threshold_mA() const noexcept {
    return elementary_charge_C * volume_um3 * threshold_density() / tauN_ns * 1e12;
  }
};

struct SteadyState {
  double N_per_um3 = 0.0;
  double S_per_um3 = 0.0;  // photon density |E|^2
};

/// Zero-derivative solution of the solitary equations at constant current.
///
/// With G clamped at 1/tauP the carrier equation is linear in S, so the lasing
/// branch has a closed form. Below threshold the field is zero.
inline SteadyState steady_state(const LaserParams& p, double current_mA) {
  p.validate();
  require(current_mA >= 0 && std::isfinite(current_mA), ErrorKind::config,
          "drive current must be finite and non-negative");
  const double pump = p.pump_rate(current_mA);
  const double nth = p.threshold_density();
  const double excess = pump - nth / p.tauN_ns;
  if (excess <= 0) return {pump * p.tauN_ns, 0.0};
  const double g_tp = p.gain_um3_per_ns * p.tauP_ns();
  const double s = excess / (1.0 / p.tauP_ns() + p.eps_um3 / (g_tp * p.tauN_ns));
  return {p.N0_per_um3 + (1.0 + p.eps_um3 * s) / g_tp, s};
}

// ---------------------------------------------------------------------------
// Drive currents

struct ConstantDrive {
  double current_mA = 0.0;
};

struct SinusoidDrive {
  double bias_mA = 0.0;
  double amplitude_mA = 0.0;
  double freq_GHz = 2.35;
  double phase_rad = 0.0;
};

struct NrzDrive {
  double low_mA = 0.0;
  double high_mA = 0.0;
  double bitrate_Gbps = 5.0;
  double rise_ps = 20.0;
  BitStream bits;
};

using DriveCurrent = std::variant<ConstantDrive, SinusoidDrive, NrzDrive>;

/// NRZ level at time t. Before t = 0 and after the last bit the line sits at
/// `low`; each level change is a linear ramp of length `rise_ns` starting at the
/// bit boundary.
inline double nrz_level(const BitStream& bits, double bit_ns, double rise_ns, double low,
                        double high, double t_ns) {
  if (t_ns < 0) return low;
  const double kf = std::floor(t_ns / bit_ns);
  const auto n = bits.size();
  const auto k = static_cast<std::size_t>(kf);
  const bool cur = k < n && bits[k];
  const bool prev = k >= 1 && k - 1 < n && bits[k - 1];
  const double target = cur ? high : low;
  if (cur == prev) return target;
  const double into = t_ns - kf * bit_ns;
  if (into >= rise_ns) return target;
  const double from = prev ? high : low;
  return from + (target - from) * (into / rise_ns);
}

inline double current_at(const DriveCurrent& drive, double t_ns) {
  return std::visit(
      [t_ns](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantDrive>) {
          return d.current_mA;
        } else if constexpr (std::is_same_v<T, SinusoidDrive>) {
          return d.bias_mA +
                 d.amplitude_mA * std::sin(2.0 * std::numbers::pi * d.freq_GHz * t_ns + d.phase_rad);
        } else {
          return nrz_level(d.bits, 1.0 / d.bitrate_Gbps, d.rise_ps * 1e-3, d.low_mA, d.high_mA, t_ns);
        }
      },
      drive);
}

// ---------------------------------------------------------------------------
// Traces and integration

struct FeedbackParams {
  double kappa = 0.25;   // feedback fraction per round trip
  double tauF_ns = 0.2;  // external-cavity delay
  double phi0_rad = 0.0;

  void validate() const {
    require(kappa >= 0 && kappa < 1, ErrorKind::config, "feedback kappa must lie in [0, 1)");
    require(tauF_ns > 0 && std::isfinite(tauF_ns), ErrorKind::config,
            "feedback delay must be positive");
    require(std::isfinite(phi0_rad), ErrorKind::config, "feedback phase must be finite");
  }
};

/// Fixed-step samples of the field and carrier density.
struct FieldTrace {
  double dt_ns = 0.0;
  std::vector<std::complex<double>> E;
  std::vector<double> N;

  [[nodiscard]] std::size_t size() const noexcept { return E.size(); }

  friend bool operator==(const FieldTrace&, const FieldTrace&) = default;
};

struct StepConfig {
  double duration_ns = 50.0;
  double dt_ps = 0.5;
  std::size_t record_every = 1;  // keep every n-th integrator step in the trace
};

struct InitialState {
  std::complex<double> E{1e-3, 0.0};
  double N_per_um3 = 0.0;
};

/// Flat history over [-tauF, 0].
struct ConstantHistory {
  std::complex<double> E{1e-3, 0.0};
  double N_per_um3 = 0.0;
};

/// Either a flat history or a trace at the integrator step whose last sample is
/// the state at t = 0.
using History = std::variant<ConstantHistory, FieldTrace>;

namespace detail {

struct LaserState {
  std::complex<double> E;
  double N;
};

class RateEquations {
public:
  explicit RateEquations(const LaserParams& p)
      : N0_(p.N0_per_um3),
        g_(p.gain_um3_per_ns),
        inv_tauN_(1.0 / p.tauN_ns),
        inv_tauP_(1.0 / p.tauP_ns()),
        eps_(p.eps_um3),
        half_one_i_alpha_(0.5, 0.5 * p.alpha) {}

  [[nodiscard]] LaserState operator()(const LaserState& s, double pump) const {
    const double photons = std::norm(s.E);
    const double gain = g_ * (s.N - N0_) / (1.0 + eps_ * photons);
    return {half_one_i_alpha_ * (gain - inv_tauP_) * s.E,
            pump - s.N * inv_tauN_ - gain * photons};
  }

private:
  double N0_, g_, inv_tauN_, inv_tauP_, eps_;
  std::complex<double> half_one_i_alpha_;
};

inline LaserState axpy(const LaserState& s, double h, const LaserState& k) {
  return {s.E + h * k.E, s.N + h * k.N};
}

struct DelayLine {
  std::complex<double> coupling;     // (kappa / tauIn) e^{-i phi0}
  std::size_t delay_steps;           // tauF / dt rounded to the nearest step
  std::vector<std::complex<double>> ring;  // E at steps n - delay .. n
};

inline std::size_t step_count(double duration_ns, double dt_ns) {
  return static_cast<std::size_t>(std::ceil(duration_ns / dt_ns - 1e-9));
}

/// Classic RK4 on the rate equations. With a delay line the retarded field is
/// read from the nearest stored grid point: E[n - D] for the first stage and
/// E[n - D + 1] for the midpoint (ties go to the later point) and end stages.
inline FieldTrace integrate(const LaserParams& p, const DriveCurrent& drive, const StepConfig& cfg,
                            LaserState state, std::optional<DelayLine> delay) {
  p.validate();
  require(cfg.duration_ns > 0 && std::isfinite(cfg.duration_ns), ErrorKind::config,
          "duration must be positive");
  require(cfg.dt_ps > 0 && cfg.dt_ps <= p.tauP_ps / 4.0 * (1.0 + 1e-12), ErrorKind::config,
          "integration step must satisfy 0 < dt <= tauP/4");
  require(cfg.record_every >= 1, ErrorKind::config, "record_every must be at least 1");

  const double dt = cfg.dt_ps * 1e-3;
  const std::size_t steps = step_count(cfg.duration_ns, dt);
  const RateEquations rhs(p);

  FieldTrace out;
  out.dt_ns = dt * static_cast<double>(cfg.record_every);
  const std::size_t n_out = steps / cfg.record_every + 1;
  out.E.reserve(n_out);
  out.N.reserve(n_out);
  out.E.push_back(state.E);
  out.N.push_back(state.N);

  std::size_t head = 0;  // ring index holding E at step n - D
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const double pump0 = p.pump_rate(current_at(drive, t));
    const double pump_mid = p.pump_rate(current_at(drive, t + 0.5 * dt));
    const double pump1 = p.pump_rate(current_at(drive, t + dt));

    LaserState k1 = rhs(state, pump0);
    if (delay) k1.E += delay->coupling * delay->ring[head];
    const std::complex<double> fb_late =
        delay ? delay->coupling * delay->ring[(head + 1) % delay->ring.size()]
              : std::complex<double>{};

    LaserState k2 = rhs(axpy(state, 0.5 * dt, k1), pump_mid);
    if (delay) k2.E += fb_late;
    LaserState k3 = rhs(axpy(state, 0.5 * dt, k2), pump_mid);
    if (delay) k3.E += fb_late;
    LaserState k4 = rhs(axpy(state, dt, k3), pump1);
    if (delay) k4.E += fb_late;

    state.E += (dt / 6.0) * (k1.E + 2.0 * k2.E + 2.0 * k3.E + k4.E);
    state.N += (dt / 6.0) * (k1.N + 2.0 * k2.N + 2.0 * k3.N + k4.N);

    if (!std::isfinite(state.E.real()) || !std::isfinite(state.E.imag()) ||
        !std::isfinite(state.N) || state.N < 0) {
      throw Error(ErrorKind::divergence,
                  "rate equations diverged at step " + std::to_string(n + 1) +
                      " (reduce dt or check parameters)",
                  n + 1);
    }

    if (delay) {
      // Overwrite the oldest entry (step n - D) with step n + 1.
      delay->ring[head] = state.E;
      head = (head + 1) % delay->ring.size();
    }
    if ((n + 1) % cfg.record_every == 0) {
      out.E.push_back(state.E);
      out.N.push_back(state.N);
    }
  }
  return out;
}

}  // namespace detail

/// Fixed-step RK4 integration of the solitary laser.
inline FieldTrace integrate_solitary(const LaserParams& params, const DriveCurrent& drive,
                                     const StepConfig& cfg, const InitialState& init) {
  return detail::integrate(params, drive, cfg, {init.E, init.N_per_um3}, std::nullopt);
}

/// Integration with delayed optical feedback. kappa = 0 takes exactly the
/// solitary code path.
inline FieldTrace integrate_feedback(const LaserParams& params, const FeedbackParams& fb,
                                     const DriveCurrent& drive, const StepConfig& cfg,
                                     const History& history) {
  fb.validate();
  require(cfg.dt_ps > 0, ErrorKind::config, "integration step must be positive");
  const double dt = cfg.dt_ps * 1e-3;
  require(fb.tauF_ns >= dt, ErrorKind::config, "feedback delay shorter than one step");
  const auto delay_steps = static_cast<std::size_t>(std::llround(fb.tauF_ns / dt));

  detail::DelayLine line;
  line.coupling = std::polar(fb.kappa / params.tauIn_ns(), -fb.phi0_rad);
  line.delay_steps = delay_steps;
  line.ring.resize(delay_steps + 1);

  detail::LaserState start{};
  if (const auto* flat = std::get_if<ConstantHistory>(&history)) {
    std::fill(line.ring.begin(), line.ring.end(), flat->E);
    start = {flat->E, flat->N_per_um3};
  } else {
    const auto& trace = std::get<FieldTrace>(history);
    require(std::abs(trace.dt_ns - dt) <= 1e-9 * dt, ErrorKind::config,
            "history trace step differs from the integration step");
    require(trace.size() >= delay_steps + 1 && trace.N.size() == trace.E.size(),
            ErrorKind::config, "history trace does not cover the feedback delay");
    std::copy(trace.E.end() - static_cast<std::ptrdiff_t>(delay_steps + 1), trace.E.end(),
              line.ring.begin());
    start = {trace.E.back(), trace.N.back()};
  }

  if (fb.kappa == 0.0) return detail::integrate(params, drive, cfg, start, std::nullopt);
  return detail::integrate(params, drive, cfg, start, std::move(line));
}

/// Optical power |E|^2 scaled to output units.
inline Waveform intensity(const FieldTrace& trace, double scale = 1.0) {
  require(trace.size() > 0, ErrorKind::input, "empty field trace");
  Waveform w;
  w.dt_ns = trace.dt_ns;
  w.samples.reserve(trace.size());
  for (const auto& e : trace.E) w.samples.push_back(scale * std::norm(e));
  return w;
}

// ---------------------------------------------------------------------------
// Chaotic source

/// Feedback laser under sinusoidal current modulation. Drive levels are
/// multiples of the derived threshold current.
struct ChaosConfig {
  FeedbackParams feedback{};
  double bias_factor = 4.0;
  double amplitude_factor = 0.15;
  double freq_GHz = 2.35;
  double dt_ps = 0.2;
  double duration_ns = 200.0;   // recorded span after the transient
  double transient_ns = 20.0;   // integrated then discarded
  std::size_t record_every = 1;
  std::uint64_t seed = 1;       // sets the initial optical phase

  void validate() const {
    feedback.validate();
    require(bias_factor > 0 && amplitude_factor >= 0 && freq_GHz > 0, ErrorKind::config,
            "chaos drive must have positive bias and frequency");
    require(duration_ns > 0 && transient_ns >= 0, ErrorKind::config,
            "chaos duration must be positive");
    require(record_every >= 1, ErrorKind::config, "record_every must be at least 1");
  }
};

inline SinusoidDrive chaos_drive(const LaserParams& p, const ChaosConfig& cfg) {
  const double ith = p.derived_threshold_mA();
  return {cfg.bias_factor * ith, cfg.amplitude_factor * ith, cfg.freq_GHz, 0.0};
}

/// Runs the chaotic source and returns the field after the transient. The
/// history is the steady state at the bias current with a seed-derived phase.
inline FieldTrace chaotic_trace(const LaserParams& p, const ChaosConfig& cfg) {
  cfg.validate();
  const auto drive = chaos_drive(p, cfg);
  const auto ss = steady_state(p, drive.bias_mA);
  std::mt19937_64 rng(cfg.seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const ConstantHistory history{std::polar(std::sqrt(std::max(ss.S_per_um3, 1e-6)), phase),
                                ss.N_per_um3};

  const double dt_ns = cfg.dt_ps * 1e-3;
  const auto stride = static_cast<double>(cfg.record_every);
  // Skip a whole number of recorded samples so the kept part starts on the grid.
  const auto skip = static_cast<std::size_t>(std::ceil(cfg.transient_ns / (dt_ns * stride) - 1e-9));
  const auto keep = static_cast<std::size_t>(std::ceil(cfg.duration_ns / (dt_ns * stride) - 1e-9));
  StepConfig steps{static_cast<double>(skip + keep) * dt_ns * stride, cfg.dt_ps, cfg.record_every};

  FieldTrace full = integrate_feedback(p, cfg.feedback, drive, steps, history);
  full.E.erase(full.E.begin(), full.E.begin() + static_cast<std::ptrdiff_t>(skip));
  full.N.erase(full.N.begin(), full.N.begin() + static_cast<std::ptrdiff_t>(skip));
  return full;
}

/// Normalized autocorrelation of a waveform at a lag of `lag` samples.
inline double waveform_autocorr(const Waveform& w, std::size_t lag) {
  require(w.size() > lag + 1, ErrorKind::input, "waveform too short for the requested lag");
  const std::size_t m = w.size() - lag;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ma += w.samples[i];
    mb += w.samples[i + lag];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double c = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = w.samples[i] - ma;
    const double b = w.samples[i + lag] - mb;
    c += a * b;
    va += a * a;
    vb += b * b;
  }
  if (va <= 0 || vb <= 0) return 1.0;  // a flat trace is perfectly predictable
  return c / std::sqrt(va * vb);
}

struct ChaosGate {
  double max_abs_acf = 0.0;
  double worst_lag_ns = 0.0;
  bool pass = false;
};

inline constexpr double chaos_gate_level = 0.2;

/// Largest |autocorrelation| of the intensity over lags in [lo_ns, hi_ns],
/// scanned on a grid of max(dt, 20 ps). Passes when it stays below 0.2.
inline ChaosGate chaos_gate(const Waveform& w, double lo_ns = 1.0, double hi_ns = 5.0) {
  require(w.dt_ns > 0 && hi_ns >= lo_ns && lo_ns >= 0, ErrorKind::config, "bad autocorrelation lag window");
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.02 / w.dt_ns)));
  const auto first = static_cast<std::size_t>(std::ceil(lo_ns / w.dt_ns - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor(hi_ns / w.dt_ns + 1e-9));
  ChaosGate g;
  for (std::size_t lag = first; lag <= last; lag += stride) {
    const double r = std::abs(waveform_autocorr(w, lag));
    if (r > g.max_abs_acf) {
      g.max_abs_acf = r;
      g.worst_lag_ns = static_cast<double>(lag) * w.dt_ns;
    }
  }
  g.pass = g.max_abs_acf < chaos_gate_level;
  return g;
}

}  // namespace chaoscipher
