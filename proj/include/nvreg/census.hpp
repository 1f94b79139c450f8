#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "nvreg/lattice.hpp"
#include "nvreg/parallel.hpp"
#include "nvreg/selective.hpp"

namespace nvreg {

struct CensusConfig {
  long long samples = 10000;
  double abundance = 0.011;
  double radius_nm = 3.0;
  std::vector<double> delta_min_grid{kHz2pi(2)};   // rad/s, sorted ascending
  std::vector<double> a_perp_min_grid{kHz2pi(10)}; // rad/s, sorted ascending
  double g_max = kHz2pi(0.05);
  bool require_angle_constraint = false;  // also report angle-constrained rows
  int reps_for_angle = 1;
  double degeneracy_tol = 1e-6;  // relative, on (A_par, A_perp)
  std::optional<std::vector<Real3>> sites_nm;  // explicit site list instead of the lattice ball
  unsigned workers = 0;
};

// A degenerate pair with the quantities every filter needs.
struct LarmorPair {
  int i = 0, j = 0;
  double a_par = 0, a_perp = 0;
  double gap = std::numeric_limits<double>::infinity();  // min |A_par - A_par,k| over other nuclei
  double max_coupling = 0;                               // max g to nuclei other than the partner
  double dphi = 0;                                       // folded azimuth difference in [0, pi/2]
};

struct PairFilter {
  double delta_min = 0;
  double a_perp_min = 0;
  double g_max = std::numeric_limits<double>::infinity();
  std::optional<double> min_dphi;  // angle constraint when set
};

inline bool degenerate(const HyperfineVector& a, const HyperfineVector& b, double tol) {
  const double scale = std::max(std::hypot(a.a_par, a.a_perp), std::hypot(b.a_par, b.a_perp));
  return std::abs(a.a_par - b.a_par) <= tol * scale && std::abs(a.a_perp - b.a_perp) <= tol * scale;
}

namespace detail {
inline double coupling(const NuclearBathSample& s, int a, int b) {
  if (s.pair_couplings.rows() == static_cast<Eigen::Index>(s.nuclei.size())) return s.pair_couplings(a, b);
  return pair_coupling(s.nuclei[a].position, s.nuclei[b].position);
}
}  // namespace detail

// Degeneracy classes of exactly two nuclei (triplets and larger are not pairs).
// Nuclei inside the contact-interaction radius never form pairs but still
// count as competitors for the A_par gap.
inline std::vector<LarmorPair> candidate_pairs(const NuclearBathSample& s, double tol = 1e-6) {
  const int n = static_cast<int>(s.nuclei.size());
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return s.nuclei[a].hyperfine.a_par < s.nuclei[b].hyperfine.a_par; });
  std::vector<LarmorPair> out;
  std::vector<bool> used(n, false);
  for (int p = 0; p < n; ++p) {
    const int a = order[p];
    if (used[a]) continue;
    std::vector<int> cls{a};
    // Scan forward while A_par is still within tolerance; collect full matches.
    for (int q = p + 1; q < n; ++q) {
      const int b = order[q];
      const auto& ha = s.nuclei[a].hyperfine;
      const auto& hb = s.nuclei[b].hyperfine;
      const double scale = std::max(std::hypot(ha.a_par, ha.a_perp), std::hypot(hb.a_par, hb.a_perp));
      if (hb.a_par - ha.a_par > tol * scale) break;
      if (!used[b] && degenerate(ha, hb, tol)) cls.push_back(b);
    }
    for (int k : cls) used[k] = true;
    if (cls.size() != 2) continue;
    const int i = std::min(cls[0], cls[1]), j = std::max(cls[0], cls[1]);
    if (!s.nuclei[i].dipole_valid || !s.nuclei[j].dipole_valid) continue;
    LarmorPair lp;
    lp.i = i;
    lp.j = j;
    lp.a_par = s.nuclei[i].hyperfine.a_par;
    lp.a_perp = s.nuclei[i].hyperfine.a_perp;
    lp.dphi = folded_angle(s.nuclei[j].hyperfine.azimuth - s.nuclei[i].hyperfine.azimuth);
    for (int k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      lp.gap = std::min(lp.gap, std::abs(s.nuclei[k].hyperfine.a_par - lp.a_par));
      lp.max_coupling = std::max({lp.max_coupling, detail::coupling(s, i, k), detail::coupling(s, j, k)});
    }
    out.push_back(lp);
  }
  std::sort(out.begin(), out.end(), [](const LarmorPair& x, const LarmorPair& y) { return std::tie(x.i, x.j) < std::tie(y.i, y.j); });
  return out;
}

inline bool passes(const LarmorPair& p, const PairFilter& f) {
  return p.gap >= f.delta_min && p.a_perp >= f.a_perp_min && p.max_coupling <= f.g_max &&
         (!f.min_dphi || p.dphi >= *f.min_dphi - 1e-12);
}

inline PairFilter filter_from(const CensusConfig& c, double delta_min, double a_perp_min, bool angle) {
  PairFilter f{delta_min, a_perp_min, c.g_max, std::nullopt};
  if (angle) f.min_dphi = min_angle(c.reps_for_angle);
  return f;
}

inline std::vector<LarmorPair> classify_pairs(const NuclearBathSample& s, const CensusConfig& c, double delta_min,
                                              double a_perp_min, bool angle) {
  auto all = candidate_pairs(s, c.degeneracy_tol);
  const PairFilter f = filter_from(c, delta_min, a_perp_min, angle);
  std::vector<LarmorPair> out;
  for (const auto& p : all)
    if (passes(p, f)) out.push_back(p);
  return out;
}

struct CensusEntry {
  double delta_min = 0, a_perp_min = 0;
  bool angle_constrained = false;
  long long hits = 0, samples = 0;
  double probability = 0;
  double ci95 = 0;  // Wilson score half-width
};

struct CensusReport {
  std::vector<CensusEntry> entries;
};

// Wilson score interval at 95% (z = 1.96).
inline std::pair<double, double> wilson_interval(long long k, long long n, double z = 1.959963984540054) {
  if (n <= 0) return {0, 1};
  const double p = double(k) / n, z2 = z * z / n;
  const double center = (p + z2 / 2) / (1 + z2);
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / (1 + z2);
  return {center - half, center + half};
}

inline CensusReport run_census(const CensusConfig& c, std::uint64_t seed) {
  if (c.samples < 1) throw Error(Errc::invalid_argument, "samples must be >= 1");
  if (c.delta_min_grid.empty() || c.a_perp_min_grid.empty()) throw Error(Errc::invalid_argument, "census grids must be nonempty");
  if (!std::is_sorted(c.delta_min_grid.begin(), c.delta_min_grid.end()) ||
      !std::is_sorted(c.a_perp_min_grid.begin(), c.a_perp_min_grid.end()))
    throw Error(Errc::invalid_argument, "census grids must be sorted");
  const std::vector<LatticeSite> sites = c.sites_nm ? std::vector<LatticeSite>{} : generate_sites(c.radius_nm);
  const std::size_t nd = c.delta_min_grid.size(), na = c.a_perp_min_grid.size();
  const int modes = c.require_angle_constraint ? 2 : 1;
  const double min_dphi = min_angle(c.reps_for_angle);
  OccupationOptions occ;
  occ.couplings = false;

  // One occupation per sample, shared by every grid point; per-sample hit flags.
  auto sample = [&](std::size_t idx) {
    const std::uint64_t s_seed = stream_seed(seed, idx);
    NuclearBathSample s;
    if (c.sites_nm) {
      Rng rng(s_seed);
      for (const auto& p : *c.sites_nm)
        if (uniform01(rng) < c.abundance) s.nuclei.push_back(make_bath_nucleus(p, occ));
    } else {
      s = sample_occupation(sites, c.abundance, s_seed, occ);
    }
    const auto pairs = candidate_pairs(s, c.degeneracy_tol);
    std::vector<char> hit(modes * nd * na, 0);
    for (const auto& p : pairs) {
      if (p.max_coupling > c.g_max) continue;
      const bool angle_ok = p.dphi >= min_dphi - 1e-12;
      for (std::size_t a = 0; a < nd; ++a)
        for (std::size_t b = 0; b < na; ++b) {
          if (p.gap < c.delta_min_grid[a] || p.a_perp < c.a_perp_min_grid[b]) continue;
          hit[a * na + b] = 1;
          if (modes == 2 && angle_ok) hit[nd * na + a * na + b] = 1;
        }
    }
    return hit;
  };
  const auto flags = parallel_map<std::vector<char>>(static_cast<std::size_t>(c.samples), sample, c.workers);
  std::vector<long long> count(modes * nd * na, 0);
  for (const auto& f : flags)
    for (std::size_t k = 0; k < f.size(); ++k) count[k] += f[k];

  CensusReport rep;
  for (int m = 0; m < modes; ++m)
    for (std::size_t a = 0; a < nd; ++a)
      for (std::size_t b = 0; b < na; ++b) {
        CensusEntry e;
        e.delta_min = c.delta_min_grid[a];
        e.a_perp_min = c.a_perp_min_grid[b];
        e.angle_constrained = m == 1;
        e.hits = count[m * nd * na + a * na + b];
        e.samples = c.samples;
        e.probability = double(e.hits) / e.samples;
        const auto [lo, hi] = wilson_interval(e.hits, e.samples);
        e.ci95 = 0.5 * (hi - lo);
        rep.entries.push_back(e);
      }
  return rep;
}

inline void write_census(std::ostream& os, const CensusReport& r) {
  os << "delta_min_2pikHz,a_perp_min_2pikHz,angle_constrained,probability,ci95\n";
  os.precision(10);
  for (const auto& e : r.entries)
    os << to_kHz2pi(e.delta_min) << ',' << to_kHz2pi(e.a_perp_min) << ',' << (e.angle_constrained ? 1 : 0) << ','
       << e.probability << ',' << e.ci95 << '\n';
}

}  // namespace nvreg
