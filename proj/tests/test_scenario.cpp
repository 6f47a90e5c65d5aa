#include <catch_amalgamated.hpp>

#include "chaoscipher/scenario.hpp"

using namespace chaoscipher;

TEST_CASE("empty text gives the defaults", "[scenario]") {
  const auto s = parse_scenario("");
  REQUIRE(to_text(s) == to_text(Scenario{}));
  REQUIRE(s.chaos.dt_ps == 0.2);
  REQUIRE(s.chaos.record_every == 1);
  REQUIRE(s.chaos.duration_ns == 200.0);
  REQUIRE(s.laser.tauP_ps == 2.0);
  REQUIRE(s.link.lpf_cutoff_GHz == 3.75);
  REQUIRE(s.bits == 10000);
  REQUIRE_NOTHROW(s.validate());
}

TEST_CASE("values override defaults", "[scenario]") {
  const auto s = parse_scenario(R"(
# comment
[laser]
tauP_ps = 2.5   # trailing comment
alpha=3

[feedback]
kappa = 0

[adc]
range = mean_sigma

[prbs]
order = 7
taps = 7, 6
seed = 0x41

[link]
threshold = midpoint
noise_sigma = 1e-3

[output]
key = out/my key.bits
)");
  REQUIRE(s.laser.tauP_ps == 2.5);
  REQUIRE(s.laser.alpha == 3.0);
  REQUIRE(s.chaos.feedback.kappa == 0.0);
  REQUIRE(s.adc.range == RangeMode::mean_sigma);
  REQUIRE(s.prbs.order == 7);
  REQUIRE(s.prbs.taps == std::vector<int>{7, 6});
  REQUIRE(s.prbs.seed == 0x41);
  REQUIRE(s.link.threshold == ThresholdMode::midpoint);
  REQUIRE(s.link.noise_sigma == 1e-3);
  REQUIRE(s.out.key == "out/my key.bits");
}

TEST_CASE("text form round trips", "[scenario]") {
  Scenario s;
  s.laser.eps_um3 = 1.234567890123e-5;
  s.link.threshold = ThresholdMode::midpoint;
  s.extractor.order = BitOrder::lsb_first;
  s.prbs = PrbsConfig::maximal(23, 77);
  s.out.report = "r.txt";
  const auto text = to_text(s);
  REQUIRE(to_text(parse_scenario(text)) == text);
  REQUIRE(text.find("tauP_ps = 2\n") != std::string::npos);
}

TEST_CASE("unknown keys and sections are rejected", "[scenario]") {
  const auto config_error = [](const std::string& text) {
    try {
      (void)parse_scenario(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::config;
    }
    return false;
  };
  REQUIRE(config_error("[laser]\ntauP = 2\n"));
  REQUIRE(config_error("[lasers]\n"));
  REQUIRE(config_error("tauP_ps = 2\n"));
  REQUIRE(config_error("[laser]\ntauP_ps\n"));
  REQUIRE(config_error("[laser]\ntauP_ps = fast\n"));
  REQUIRE(config_error("[adc]\nbits = 8.5\n"));
  REQUIRE(config_error("[link]\nthreshold = otsu\n"));
  REQUIRE(config_error("[laser\n"));
}

TEST_CASE("errors name the line", "[scenario]") {
  try {
    (void)parse_scenario("[laser]\n\nbogus = 1\n");
    FAIL("expected error");
  } catch (const Error& e) {
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("one seed drives every random source", "[scenario]") {
  Scenario s;
  s.reseed(42);
  REQUIRE(s.chaos.seed == 42);
  REQUIRE(s.link.noise_seed == 42);
  REQUIRE(s.prbs.seed == 42);
  s.reseed(std::uint64_t{1} << 15);
  REQUIRE(s.prbs.seed == 1);
  REQUIRE_NOTHROW(s.validate());
}

TEST_CASE("simulate configuration", "[scenario]") {
  Scenario s;
  s.bits = 1234;
  const auto cfg = s.end_to_end();
  REQUIRE(cfg.bits == 1234);
  REQUIRE(cfg.chaos.record_every == 500);
  REQUIRE(cfg.chaos.dt_ps == 0.2);
}
