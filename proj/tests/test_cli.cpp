// Config parsing, artifacts and reproducibility of the command-line harness.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "commands.hpp"
#include "nvreg/nvreg.hpp"

using namespace nvreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("nvreg_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.yaml";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_message(const std::string& sub, const fs::path& cfg) {
  try {
    cli::run_subcommand(sub, {cfg.string(), std::nullopt, (cfg.parent_path() / "out").string()});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_parse);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

const char* kHyperfine = R"(seed: 7
hyperfine:
  positions_nm:
    - [0.1785, 0.1785, 1.071]
    - [0.1785, 1.071, 0.1785]
  sample:
    radius_nm: 1.5
    abundance: 0.05
)";

}  // namespace

TEST_CASE("config errors name the key and line", "[cli]") {
  const fs::path d = scratch_dir("errors");
  SECTION("unknown key") {
    const auto msg = error_message("hyperfine", write_config(d, std::string(kHyperfine) + "bogus_key: 1\n"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("bogus_key"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("line 9"));
  }
  SECTION("wrong type") {
    const auto msg = error_message("hyperfine", write_config(d, "seed: 7\nhyperfine:\n  positions_nm: [[0.1, 0.2, x]]\n"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("line 3"));
  }
  SECTION("missing key") {
    const auto msg = error_message("polar-scan", write_config(d, R"(register:
  b_field_T: 0.02
  weak_field_factor: 5
  nuclei:
    - {position_nm: [0.1785, 0.1785, 1.071]}
polar:
  pulses: 100
)"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("polar.f1"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("line"));
  }
  SECTION("syntax error") {
    const auto msg = error_message("hyperfine", write_config(d, "hyperfine: [unclosed\n"));
    CHECK_THAT(msg, Catch::Matchers::ContainsSubstring("line"));
  }
  SECTION("unknown subcommand") {
    CHECK_THROWS_AS(cli::run_subcommand("no-such-thing", {"x.yaml", std::nullopt, std::nullopt}), Error);
  }
}

TEST_CASE("hyperfine artifacts, reruns and seed override", "[cli]") {
  const fs::path d = scratch_dir("hyperfine");
  const fs::path cfg = write_config(d, kHyperfine);
  const auto r1 = cli::run_subcommand("hyperfine", {cfg.string(), std::nullopt, (d / "a").string()});
  const auto r2 = cli::run_subcommand("hyperfine", {cfg.string(), std::nullopt, (d / "b").string()});
  const auto r3 = cli::run_subcommand("hyperfine", {cfg.string(), 8, (d / "c").string()});

  const auto t = cli::read_csv((d / "a" / "hyperfine.csv").string());
  REQUIRE(t.rows.size() == 2);
  REQUIRE(t.header.size() >= 5);
  for (const auto& row : t.rows) {
    CHECK(std::abs(row[3] / 10.2 - 1) < 0.02);
    CHECK(std::abs(row[4] / 22.2 - 1) < 0.02);
  }
  for (const char* f : {"hyperfine.csv", "bath.txt"}) CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  CHECK(slurp(d / "a" / "bath.txt") != slurp(d / "c" / "bath.txt"));

  std::ifstream bath(d / "a" / "bath.txt");
  const auto s = read_bath(bath);
  CHECK(!s.nuclei.empty());
  CHECK(r3.artifacts.size() == r1.artifacts.size());
}

TEST_CASE("robustness grid has one row per point", "[cli]") {
  const fs::path d = scratch_dir("robustness");
  const fs::path cfg = write_config(d, R"(seed: 1
register:
  b_field_T: 0.4
  designate_pair: true
  nuclei:
    - {position_nm: [0.1785, 0.1785, 1.071]}
    - {position_nm: [0.1785, 1.071, 0.1785]}
scan:
  target: u_int
  theta_deg: 90
  harmonic: 45
  pulses: 320
  amplitude_frac: {from: -0.01, to: 0.01, steps: 11}
  detuning_frac: {from: -0.005, to: 0.005, steps: 11}
)");
  cli::run_subcommand("robustness-scan", {cfg.string(), std::nullopt, (d / "out").string()});
  const auto t = cli::read_csv((d / "out" / "robustness.csv").string());
  CHECK(t.rows.size() == 121);
  for (const auto& row : t.rows) CHECK(row.back() > 0.99);
}

TEST_CASE("every documented example runs and its artifacts re-parse", "[examples]") {
  const fs::path examples = NVREG_EXAMPLES_DIR;
  const fs::path d = scratch_dir("examples");
  int ran = 0;
  for (const auto& entry : fs::directory_iterator(examples)) {
    if (entry.path().extension() != ".yaml") continue;
    std::string sub = entry.path().stem().string();
    for (const auto& name : cli::subcommands())
      if (sub.rfind(name, 0) == 0) sub = name;
    REQUIRE(std::find(cli::subcommands().begin(), cli::subcommands().end(), sub) != cli::subcommands().end());
    const fs::path out = d / entry.path().stem();
    INFO(entry.path().string());
    const auto r = cli::run_subcommand(sub, {entry.path().string(), std::nullopt, out.string()});
    CHECK(!r.artifacts.empty());
    for (const auto& a : r.artifacts) {
      const fs::path p = a;
      REQUIRE(fs::exists(p));
      if (p.extension() == ".csv") {
        CHECK(!cli::read_csv(p.string()).rows.empty());
      } else if (p.extension() == ".json") {
        CHECK_NOTHROW(nlohmann::json::parse(slurp(p)));
      } else if (p.filename() == "bath.txt") {
        std::ifstream in(p);
        CHECK(!read_bath(in).nuclei.empty());
      } else if (p.filename() == "sequence.txt") {
        std::ifstream in(p);
        CHECK(!read_events(in).empty());
      }
    }
    ++ran;
  }
  CHECK(ran == 9);
}
