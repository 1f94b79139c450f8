// Larmor-pair census, stochastic-noise coherence and identification scans.

#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "oracles.hpp"

using namespace nvreg;
using Catch::Approx;

namespace {

constexpr double deg = pi / 180;

const Real3 kPairA(0.1785, 0.1785, 1.071), kPairB(0.1785, 1.071, 0.1785);
const Real3 kBath1(0.26775, 0.44625, 0.98175);
const Real3 kDps(0.08925, 0.08925, 0.80325);

SpinRegister dfs_register() {
  RegisterOptions o;
  o.designate_pair = true;
  return build_register({hyperfine_vector(kPairA), hyperfine_vector(kPairB)}, 0.4, -1, o);
}

SpinRegister dps_register() {
  RegisterOptions o;
  o.weak_field_factor = 5;
  return build_register({hyperfine_vector(kDps), hyperfine_vector(kPairB)}, 0.4, -1, o);
}

}  // namespace

// ---------------------------------------------------------------- census

TEST_CASE("pair classification agrees with the brute-force oracle", "[census]") {
  const auto sites = generate_sites(1.5);
  Rng rng(31);
  int with_pairs = 0;
  for (int t = 0; t < 100; ++t) {
    const NuclearBathSample s = oracle::symmetric_sample(rng, sites);
    PairFilter f;
    f.delta_min = kHz2pi(20 * uniform01(rng));
    f.a_perp_min = kHz2pi(30 * uniform01(rng));
    f.g_max = uniform01(rng) < 0.3 ? std::numeric_limits<double>::infinity() : kHz2pi(2 * uniform01(rng));
    if (t % 2) f.min_dphi = min_angle(1 + t % 3);

    std::vector<oracle::Pair> lib;
    for (const auto& p : candidate_pairs(s))
      if (passes(p, f)) lib.push_back({p.i, p.j});
    const auto ref = oracle::classify(s, f, 1e-6);
    CHECK(lib == ref);
    // The unfiltered candidates too.
    std::vector<oracle::Pair> all, all_ref = oracle::classify(s, PairFilter{}, 1e-6);
    for (const auto& p : candidate_pairs(s)) all.push_back({p.i, p.j});
    CHECK(all == all_ref);
    with_pairs += all_ref.empty() ? 0 : 1;
  }
  CHECK(with_pairs >= 20);  // the injection actually exercises pairs
}

TEST_CASE("competitor nuclei and triplets", "[census]") {
  CensusConfig c;
  c.g_max = std::numeric_limits<double>::infinity();
  const auto pair_only = bath_from_positions({kPairA, kPairB});
  CHECK(classify_pairs(pair_only, c, kHz2pi(5), kHz2pi(10), false).size() == 1);

  // The bath nucleus sits 9.06 2pi kHz away in A_par.
  const auto with_bath = bath_from_positions({kPairA, kPairB, kBath1});
  CHECK(classify_pairs(with_bath, c, kHz2pi(10), kHz2pi(10), false).empty());
  CHECK(classify_pairs(with_bath, c, kHz2pi(5), kHz2pi(10), false).size() == 1);
  CHECK(classify_pairs(with_bath, c, kHz2pi(5), kHz2pi(30), false).empty());

  // A third symmetry image turns the pair into a triplet: no pair.
  const Real3 third(1.071, 0.1785, 0.1785);
  CHECK(hyperfine_vector(third).a_par == Approx(hyperfine_vector(kPairA).a_par).epsilon(1e-9));
  CHECK(candidate_pairs(bath_from_positions({kPairA, kPairB, third})).empty());

  // Inside the contact radius nothing pairs.
  CHECK(candidate_pairs(bath_from_positions({kPairA, kPairB}, {.min_distance_nm = 2.0})).empty());
}

TEST_CASE("census trends", "[census]") {
  CensusConfig c;
  c.samples = 400;
  c.radius_nm = 2.5;
  c.abundance = 0.03;
  c.delta_min_grid = {kHz2pi(0.5), kHz2pi(1), kHz2pi(2), kHz2pi(4)};
  c.a_perp_min_grid = {kHz2pi(2), kHz2pi(5), kHz2pi(10), kHz2pi(20)};
  c.g_max = kHz2pi(0.2);
  c.require_angle_constraint = true;
  c.workers = 1;
  const CensusReport r = run_census(c, 11);
  REQUIRE(r.entries.size() == 2 * 16);

  std::map<std::tuple<bool, double, double>, double> p;
  for (const auto& e : r.entries) p[{e.angle_constrained, e.delta_min, e.a_perp_min}] = e.probability;
  double total = 0;
  for (bool ang : {false, true})
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        const double v = p[{ang, c.delta_min_grid[a], c.a_perp_min_grid[b]}];
        total += v;
        if (a + 1 < 4) CHECK(p[{ang, c.delta_min_grid[a + 1], c.a_perp_min_grid[b]}] <= v);
        if (b + 1 < 4) CHECK(p[{ang, c.delta_min_grid[a], c.a_perp_min_grid[b + 1]}] <= v);
        if (ang) CHECK(v <= p[{false, c.delta_min_grid[a], c.a_perp_min_grid[b]}]);
      }
  CHECK(total > 0);

  SECTION("looser coupling bound never lowers the probability") {
    CensusConfig loose = c;
    loose.g_max = kHz2pi(1);
    const CensusReport rl = run_census(loose, 11);
    for (std::size_t k = 0; k < r.entries.size(); ++k) CHECK(rl.entries[k].hits >= r.entries[k].hits);
  }
  SECTION("worker count does not change the result") {
    CensusConfig par = c;
    par.workers = 4;
    const CensusReport rp = run_census(par, 11);
    for (std::size_t k = 0; k < r.entries.size(); ++k) CHECK(rp.entries[k].hits == r.entries[k].hits);
  }
  SECTION("zero abundance") {
    CensusConfig z = c;
    z.abundance = 0;
    for (const auto& e : run_census(z, 3).entries) CHECK(e.probability == 0);
  }
}

TEST_CASE("natural abundance yields pairs", "[census]") {
  CensusConfig c;
  c.samples = 1000;
  c.radius_nm = 3.0;
  c.abundance = 0.011;
  c.delta_min_grid = {kHz2pi(1)};
  c.a_perp_min_grid = {kHz2pi(1)};
  c.g_max = kHz2pi(1);
  const auto r = run_census(c, 7);
  CHECK(r.entries.at(0).probability > 0);
}

TEST_CASE("Wilson interval coverage", "[census]") {
  // Two-site list: the pair forms iff both sites are occupied, probability q^2.
  CensusConfig c;
  c.samples = 200;
  c.abundance = 0.4;
  c.sites_nm = std::vector<Real3>{kPairA, kPairB};
  c.delta_min_grid = {kHz2pi(1)};
  c.a_perp_min_grid = {kHz2pi(10)};
  c.workers = 1;
  const double truth = c.abundance * c.abundance;
  int covered = 0;
  const int reps = 1000;
  for (int k = 0; k < reps; ++k) {
    const auto e = run_census(c, 1000 + k).entries.at(0);
    const auto [lo, hi] = wilson_interval(e.hits, e.samples);
    CHECK(hi - lo == Approx(2 * e.ci95).margin(1e-15));
    covered += lo <= truth && truth <= hi ? 1 : 0;
  }
  CHECK(covered >= 930);
  CHECK(wilson_interval(0, 10).first == Approx(0).margin(1e-15));
}

// ---------------------------------------------------------------- noise

TEST_CASE("coherence under electron noise", "[noise]") {
  NoiseChannel ch;
  ch.cycle_period = 10e-6;

  SECTION("no events keeps both encodings coherent") {
    for (auto [reg, enc] : {std::pair{dfs_register(), Encoding::DFS}, std::pair{dps_register(), Encoding::DPS}}) {
      const auto tr = coherence_under_noise(reg, enc, ch, 1000, 20, 1);
      for (const auto& [n, c] : tr.points) CHECK(c == Approx(1).margin(1e-6));
    }
  }
  SECTION("resets: DFS immune, DPS decays") {
    ch.events_per_cycle = 0.05;
    const auto dfs = coherence_under_noise(dfs_register(), Encoding::DFS, ch, 10000, 200, 3);
    const auto dps = coherence_under_noise(dps_register(), Encoding::DPS, ch, 10000, 200, 3);
    for (const auto& [n, c] : dfs.points) CHECK(c >= 0.99);
    CHECK(dps.points.front().second == Approx(1));
    CHECK(dps.points.back().second < 0.8);
  }
  SECTION("flips also dephase the DPS") {
    ch.kind = NoiseKind::electron_flip;
    ch.events_per_cycle = 0.05;
    CHECK(coherence_under_noise(dps_register(), Encoding::DPS, ch, 10000, 200, 4).points.back().second < 0.8);
  }
  SECTION("deterministic across worker counts") {
    ch.events_per_cycle = 0.1;
    const auto a = coherence_under_noise(dps_register(), Encoding::DPS, ch, 2000, 64, 9, {}, 1);
    const auto b = coherence_under_noise(dps_register(), Encoding::DPS, ch, 2000, 64, 9, {}, 4);
    CHECK(a.points == b.points);
  }
  SECTION("DFS needs equal A_par") {
    CHECK_THROWS_AS(coherence_under_noise(dps_register(), Encoding::DFS, ch, 10, 1, 1), Error);
  }
}

// ---------------------------------------------------------------- scans

TEST_CASE("DEE spectrum", "[scans]") {
  const double b = 0.5;
  const Real3 c3a(0.44625, 0.98175, 0.26775), c3b(0.26775, 0.44625, 0.98175);
  RegisterOptions ro;
  ro.designate_pair = true;
  const SpinRegister pair = build_register({hyperfine_vector(c3a), hyperfine_vector(c3b)}, b, -1, ro);
  const SpinRegister single = build_register({hyperfine_vector(c3a)}, b, -1);
  const double wl = pair.nucleus(1).larmor;
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(wl + kHz2pi(-30 + 2.0 * i));

  SECTION("no nuclei reads one everywhere") {
    const auto flat = dee_spectrum(build_register({}, b, -1), grid);
    for (const auto& q : flat) CHECK(q.signal == Approx(1).margin(1e-9));
  }
  SECTION("pair dip is deeper than the single-spin dip") {
    auto lowest = [](const std::vector<ScanPoint>& s) {
      double m = 1;
      for (const auto& q : s) m = std::min(m, q.signal);
      return m;
    };
    const double one = lowest(dee_spectrum(single, grid)), two = lowest(dee_spectrum(pair, grid));
    CHECK(one < 0.95);
    CHECK(two < one - 0.05);
  }
}

TEST_CASE("polar position scan", "[scans]") {
  RegisterOptions ro;
  ro.weak_field_factor = 5;
  const double f1 = 0.18;
  PolarParams pp;
  std::vector<double> grid;
  for (int i = 0; i < 36; ++i) grid.push_back(i * pi / 36);

  SECTION("single nucleus: one minimum at its azimuth") {
    const SpinRegister reg = build_register({hyperfine_vector(kPairA)}, 0.02, -1, ro);
    const auto scan = polar_position_scan(reg, grid, f1, pp);
    const auto mins = scan_minima(scan);
    REQUIRE(mins.size() == 1);
    CHECK(angle_distance_mod_pi(mins[0].x, reg.nucleus(1).hyperfine.azimuth) <= 5 * deg + 1e-9);

    const double duration = build_sequence(Family::AXY8, 1, reg.nucleus(1).larmor, f1, pp.pulses).total_time;
    double worst = 0;
    for (const auto& q : scan)
      worst = std::max(worst, std::abs(q.signal - polar_model({reg.nucleus(1).hyperfine.azimuth}, q.x, f1,
                                                                 reg.nucleus(1).hyperfine.a_perp, pp.rf_rabi, duration)));
    CHECK(worst < 0.03);
  }
  SECTION("no nucleus is rejected") {
    CHECK_THROWS_AS(polar_position_scan(build_register({}, 0.02, -1), grid, f1, pp), Error);
  }
}
