// chaoscipher: command-line front end.
//
// Every command reads an optional scenario file (--config) and writes its main
// product to --out (or the scenario's [output] path). Exit codes: 0 ok,
// 2 configuration or I/O error, 3 numerical divergence, 4 degenerate or bad
// input, 5 failed randomness tests under --strict.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chaoscipher/cipher.hpp"
#include "chaoscipher/io.hpp"
#include "chaoscipher/kv.hpp"
#include "chaoscipher/laser.hpp"
#include "chaoscipher/phy.hpp"
#include "chaoscipher/scenario.hpp"
#include "chaoscipher/stats.hpp"
#include "chaoscipher/trng.hpp"

using namespace chaoscipher;
namespace fs = std::filesystem;

namespace {

constexpr int strict_failure_exit = 5;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_config = false;
};

Scenario load_scenario(const Globals& g) {
  Scenario s = g.config.empty() ? Scenario{} : parse_scenario(io::read_file(g.config));
  if (g.seed) s.reseed(*g.seed);
  s.validate();
  return s;
}

fs::path out_path(const Globals& g, const std::string& fallback) {
  return g.out.empty() ? fs::path(fallback) : fs::path(g.out);
}

void print(const KeyValues& kv) { std::cout << kv.to_string() << std::flush; }

int cmd_chaos(const Globals& g) {
  const Scenario s = load_scenario(g);
  const Waveform w = intensity(chaotic_trace(s.laser, s.chaos));
  const auto path = out_path(g, s.out.chaos_trace);
  io::write_trace(path, w);
  const auto gate = chaos_gate(w);

  KeyValues kv;
  kv.add("file", path.string());
  kv.add("dt_ps", w.dt_ns * 1e3);
  kv.add("samples", w.size());
  kv.add("duration_ns", w.span_ns());
  kv.add("acfMaxAbs_1to5ns", gate.max_abs_acf);
  kv.add("acfWorstLag_ns", gate.worst_lag_ns);
  kv.add("chaosGate", gate.pass ? "PASS" : "FAIL");
  print(kv);
  return 0;
}

int cmd_keygen(const Globals& g, const std::string& trace_file, bool with_stats) {
  const Scenario s = load_scenario(g);
  const Waveform w = io::read_trace(trace_file.empty() ? s.out.chaos_trace : trace_file);
  const Waveform clocked = clock_sample(w, s.adc);
  const BitStream key = diff_lsb(quantize(clocked, s.adc), s.extractor);
  const auto path = out_path(g, s.out.key);
  io::write_bits(path, key);

  KeyValues kv;
  kv.add("file", path.string());
  kv.add("clockedSamples", clocked.size());
  kv.add("keyBits", key.size());
  kv.add("rate_Gbps", key_rate_Gbps(s.adc, s.extractor));
  if (with_stats) kv.append(stats::full_report(key).to_kv(), "stats.");
  print(kv);
  return 0;
}

int cmd_encrypt(const Globals& g, const std::string& key_file, const std::string& in_file,
                std::optional<std::size_t> bits) {
  const Scenario s = load_scenario(g);
  const BitStream key = io::read_bits(key_file);
  const BitStream plain = in_file.empty() ? prbs(s.prbs, bits.value_or(s.bits)) : io::read_bits(in_file);
  const BitStream cipher = xor_stream(plain, key);
  const auto path = out_path(g, s.out.ciphertext);
  io::write_bits(path, cipher);
  if (in_file.empty()) io::write_bits(fs::path(path).replace_extension(".plain.bits"), plain);

  KeyValues kv;
  kv.add("file", path.string());
  kv.add("plaintextBits", plain.size());
  kv.add("keyBitsUnused", key.size() - plain.size());
  print(kv);
  return 0;
}

int cmd_decrypt(const Globals& g, const std::string& key_file, const std::string& cipher_file) {
  const Scenario s = load_scenario(g);
  const BitStream plain = xor_stream(io::read_bits(cipher_file), io::read_bits(key_file));
  const auto path = out_path(g, s.out.plaintext);
  io::write_bits(path, plain);

  KeyValues kv;
  kv.add("file", path.string());
  kv.add("plaintextBits", plain.size());
  print(kv);
  return 0;
}

int cmd_simulate(const Globals& g, std::optional<std::size_t> bits, bool eyes, bool waveforms) {
  Scenario s = load_scenario(g);
  if (bits) s.bits = *bits;
  const auto r = run_end_to_end(s.end_to_end());
  const auto path = out_path(g, s.out.report);

  KeyValues kv = r.report.to_kv();
  if (eyes) {
    const double rate = s.link.bitrate_Gbps;
    const fs::path ld = s.out.eye_prefix + "_ld.pgm";
    const fs::path sampled = s.out.eye_prefix + "_sampled.pgm";
    io::write_file(ld, io::encode_pgm(eye(r.ld_cipher, rate, s.eye.time_bins, s.eye.amp_bins)));
    io::write_file(sampled, io::encode_pgm(eye(r.rx_cipher, rate, s.eye.time_bins, s.eye.amp_bins)));
    kv.add("eyeLd", ld.string());
    kv.add("eyeSampled", sampled.string());
  }
  if (waveforms) {
    const auto written = io::write_panels(s.out.waveform_dir, r, s.link.bitrate_Gbps);
    kv.add("waveforms", written.size());
    kv.add("waveformDir", s.out.waveform_dir);
  }
  io::write_file(path, kv.to_string());
  print(kv);
  return 0;
}

int cmd_stats(const Globals& g, const std::string& bits_file, bool strict) {
  const Scenario s = load_scenario(g);
  const auto rep = stats::full_report(io::read_bits(bits_file));
  const auto text = rep.to_kv().to_string();
  io::write_file(out_path(g, s.out.stats), text);
  std::cout << text << std::flush;
  return strict && !rep.all_pass() ? strict_failure_exit : 0;
}

int cmd_eye(const Globals& g, const std::string& trace_file, std::optional<double> bitrate, bool csv) {
  const Scenario s = load_scenario(g);
  const Waveform w = io::read_trace(trace_file);
  const auto e = eye(w, bitrate.value_or(s.link.bitrate_Gbps), s.eye.time_bins, s.eye.amp_bins);
  const auto path = out_path(g, s.out.eye_prefix + (csv ? ".csv" : ".pgm"));
  io::write_file(path, csv ? io::encode_eye_csv(e) : io::encode_pgm(e));

  KeyValues kv;
  kv.add("file", path.string());
  kv.add("samples", e.total());
  kv.add("ampLo", e.amp_lo);
  kv.add("ampHi", e.amp_hi);
  print(kv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chaotic-laser TRNG and optical stream cipher simulator"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Scenario file (sectioned key = value)");
  app.add_option("--seed", g.seed, "Seed for the chaos phase, receiver noise and plaintext register");
  app.add_option("--out", g.out, "Main output file of the command");
  app.add_flag("--print-config", g.print_config, "Print the effective scenario and exit");

  auto* chaos = app.add_subcommand("chaos", "Integrate the chaotic laser and write its intensity trace");

  std::string trace_file;
  bool key_stats = false;
  auto* keygen = app.add_subcommand("keygen", "Extract a key from a chaos trace (CSV or binary)");
  keygen->add_option("trace", trace_file, "Input trace (default: the scenario's chaos_trace)");
  keygen->add_flag("--stats", key_stats, "Append the randomness report");

  std::string key_file, in_file;
  std::optional<std::size_t> bits;
  auto* encrypt = app.add_subcommand("encrypt", "XOR a plaintext with a key");
  encrypt->add_option("--key", key_file, "Key bitstream")->required();
  encrypt->add_option("--in", in_file, "Plaintext bitstream (default: PRBS from the scenario)");
  encrypt->add_option("--bits", bits, "PRBS plaintext length");

  std::string cipher_file;
  auto* decrypt = app.add_subcommand("decrypt", "XOR a ciphertext with a key");
  decrypt->add_option("--key", key_file, "Key bitstream")->required();
  decrypt->add_option("ciphertext", cipher_file, "Ciphertext bitstream")->required();

  bool eyes = false, waveforms = false;
  auto* simulate = app.add_subcommand("simulate", "Run the back-to-back link end to end");
  simulate->add_option("--bits", bits, "Plaintext bits to send");
  simulate->add_flag("--eye", eyes, "Write LD-output and sampled eye diagrams as PGM");
  simulate->add_flag("--waveforms", waveforms, "Write per-stage waveform CSVs");

  std::string bits_file;
  bool strict = false;
  auto* stats_cmd = app.add_subcommand("stats", "Run the randomness battery on a bitstream");
  stats_cmd->add_option("bitstream", bits_file, "Bitstream file")->required();
  stats_cmd->add_flag("--strict", strict, "Exit with status 5 if any test fails");

  std::optional<double> bitrate;
  bool eye_csv = false;
  auto* eye_cmd = app.add_subcommand("eye", "Fold a trace into an eye diagram");
  eye_cmd->add_option("trace", trace_file, "Input trace")->required();
  eye_cmd->add_option("--bitrate", bitrate, "Bit rate in Gbit/s (default: the scenario's)");
  eye_cmd->add_flag("--csv", eye_csv, "Write counts as CSV instead of PGM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (g.print_config) {
      std::cout << to_text(load_scenario(g));
      return 0;
    }
    if (chaos->parsed()) return cmd_chaos(g);
    if (keygen->parsed()) return cmd_keygen(g, trace_file, key_stats);
    if (encrypt->parsed()) return cmd_encrypt(g, key_file, in_file, bits);
    if (decrypt->parsed()) return cmd_decrypt(g, key_file, cipher_file);
    if (simulate->parsed()) return cmd_simulate(g, bits, eyes, waveforms);
    if (stats_cmd->parsed()) return cmd_stats(g, bits_file, strict);
    if (eye_cmd->parsed()) return cmd_eye(g, trace_file, bitrate, eye_csv);
    std::cout << app.help();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
