#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "nvreg/constants.hpp"
#include "nvreg/random.hpp"
#include "nvreg/spin.hpp"

namespace nvreg {

inline Real3 default_nv_axis() { return Real3(1, 1, 1).normalized(); }

// Orthonormal NV frame: z along the axis, x' from [1,-1,0] projected off z.
struct NvFrame {
  Real3 z, x, y;
  explicit NvFrame(const Real3& axis = default_nv_axis()) {
    z = axis.normalized();
    Real3 ref(1, -1, 0);
    Real3 xp = ref - ref.dot(z) * z;
    if (xp.norm() < 1e-9) {
      ref = Real3(1, 0, 0);
      xp = ref - ref.dot(z) * z;
    }
    x = xp.normalized();
    y = z.cross(x);
  }
};

// Raw point-dipole hyperfine field (rad/s) in lab coordinates.
inline Real3 hyperfine_field(const Real3& position_nm, const Real3& nv_axis = default_nv_axis()) {
  const double r = position_nm.norm() * 1e-9;
  const Real3 rhat = position_nm.normalized();
  const Real3 z = nv_axis.normalized();
  const double pref = mu0_over_4pi * gamma_e * gamma_c13 * hbar / (r * r * r);
  return pref * (3 * z.dot(rhat) * rhat - z);
}

inline HyperfineVector decompose(const Real3& field, const NvFrame& frame) {
  HyperfineVector h;
  h.a_par = field.dot(frame.z);
  const Real3 perp = field - h.a_par * frame.z;
  h.a_perp = perp.norm();
  const double phi = std::atan2(perp.dot(frame.y), perp.dot(frame.x));
  h.azimuth = phi < 0 ? phi + two_pi : phi;
  if (h.azimuth >= two_pi) h.azimuth -= two_pi;
  return h;
}

inline Real3 reconstruct(const HyperfineVector& h, const NvFrame& frame) {
  return h.a_par * frame.z + h.a_perp * (std::cos(h.azimuth) * frame.x + std::sin(h.azimuth) * frame.y);
}

inline constexpr double default_min_distance_nm = 0.25;

inline HyperfineVector hyperfine_vector(const Real3& position_nm, const Real3& nv_axis = default_nv_axis(),
                                        double min_distance_nm = default_min_distance_nm) {
  if (position_nm.norm() < min_distance_nm)
    throw Error(Errc::too_close, "site at " + std::to_string(position_nm.norm()) +
                                     " nm is inside the contact-interaction region");
  return decompose(hyperfine_field(position_nm, nv_axis), NvFrame(nv_axis));
}

// Signed secular dipolar coupling D (1 - 3 cos^2 theta_z), rad/s.
inline double dipolar_coupling(const Real3& a_nm, const Real3& b_nm, const Real3& nv_axis = default_nv_axis()) {
  const Real3 d = b_nm - a_nm;
  const double rn = d.norm();
  if (rn < 1e-12) throw Error(Errc::coincident_sites, "identical positions");
  const double r = rn * 1e-9;
  const double c = d.dot(nv_axis.normalized()) / rn;
  return mu0_over_4pi * gamma_c13 * gamma_c13 * hbar / (r * r * r) * (1 - 3 * c * c);
}

inline double pair_coupling(const Real3& a_nm, const Real3& b_nm, const Real3& nv_axis = default_nv_axis()) {
  return std::abs(dipolar_coupling(a_nm, b_nm, nv_axis));
}

// ---------------------------------------------------------------- lattice

struct LatticeSite {
  std::array<int, 3> cell{};  // integer coordinates in units of a/4
  Real3 position() const { return Real3(cell[0], cell[1], cell[2]) * lattice_unit_nm; }
};

// Diamond cubic in units of a/4: all-even coordinates with sum = 0 mod 4 (fcc),
// or all-odd with sum = 3 mod 4 (fcc shifted by [1,1,1]).
inline bool is_diamond_site(int a, int b, int c) {
  const int s = ((a + b + c) % 4 + 4) % 4;
  const bool even = a % 2 == 0 && b % 2 == 0 && c % 2 == 0;
  const bool odd = a % 2 != 0 && b % 2 != 0 && c % 2 != 0;
  return (even && s == 0) || (odd && s == 3);
}

inline std::vector<LatticeSite> generate_sites(double radius_nm) {
  std::vector<LatticeSite> out;
  if (!(radius_nm > 0)) return out;
  const int n = static_cast<int>(std::floor(radius_nm / lattice_unit_nm)) + 1;
  const double r2 = radius_nm * radius_nm * (1 + 1e-12);
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b)
      for (int c = -n; c <= n; ++c) {
        if (!is_diamond_site(a, b, c)) continue;
        if ((a == 0 && b == 0 && c == 0) || (a == 1 && b == 1 && c == 1)) continue;  // vacancy, nitrogen
        const double d2 = (double(a) * a + double(b) * b + double(c) * c) * lattice_unit_nm * lattice_unit_nm;
        if (d2 > r2) continue;
        out.push_back({{a, b, c}});
      }
  return out;
}

// ---------------------------------------------------------------- bath samples

struct BathNucleus {
  Real3 position;  // nm
  HyperfineVector hyperfine;
  bool dipole_valid = true;  // false inside the contact-interaction radius
};

struct NuclearBathSample {
  std::vector<BathNucleus> nuclei;
  Eigen::MatrixXd pair_couplings;  // |g|, rad/s, zero diagonal
};

struct OccupationOptions {
  Real3 nv_axis = default_nv_axis();
  double min_distance_nm = default_min_distance_nm;
  bool couplings = true;
};

inline BathNucleus make_bath_nucleus(const Real3& pos, const OccupationOptions& opt) {
  BathNucleus b;
  b.position = pos;
  b.hyperfine = decompose(hyperfine_field(pos, opt.nv_axis), NvFrame(opt.nv_axis));
  b.dipole_valid = pos.norm() >= opt.min_distance_nm;
  return b;
}

inline Eigen::MatrixXd coupling_matrix(const std::vector<BathNucleus>& nuc, const Real3& nv_axis) {
  const auto n = static_cast<Eigen::Index>(nuc.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) g(i, j) = g(j, i) = pair_coupling(nuc[i].position, nuc[j].position, nv_axis);
  return g;
}

inline NuclearBathSample sample_occupation(const std::vector<LatticeSite>& sites, double abundance, std::uint64_t seed,
                                           const OccupationOptions& opt = {}) {
  if (!(abundance >= 0 && abundance <= 1)) throw Error(Errc::invalid_argument, "abundance outside [0,1]");
  Rng rng(seed);
  NuclearBathSample s;
  for (const auto& site : sites)
    if (uniform01(rng) < abundance) s.nuclei.push_back(make_bath_nucleus(site.position(), opt));
  if (opt.couplings) s.pair_couplings = coupling_matrix(s.nuclei, opt.nv_axis);
  return s;
}

inline NuclearBathSample bath_from_positions(const std::vector<Real3>& positions, const OccupationOptions& opt = {}) {
  NuclearBathSample s;
  for (const auto& p : positions) s.nuclei.push_back(make_bath_nucleus(p, opt));
  s.pair_couplings = coupling_matrix(s.nuclei, opt.nv_axis);
  return s;
}

// Line-oriented text: x y z (nm), A_par, A_perp (2pi kHz), azimuth (rad).
inline void write_bath(std::ostream& os, const NuclearBathSample& s) {
  os << "# x_nm y_nm z_nm a_par_2pikHz a_perp_2pikHz azimuth_rad\n";
  os << std::setprecision(17);
  for (const auto& n : s.nuclei)
    os << n.position.x() << ' ' << n.position.y() << ' ' << n.position.z() << ' ' << to_kHz2pi(n.hyperfine.a_par)
       << ' ' << to_kHz2pi(n.hyperfine.a_perp) << ' ' << n.hyperfine.azimuth << '\n';
}

inline NuclearBathSample read_bath(std::istream& is, const OccupationOptions& opt = {}) {
  NuclearBathSample s;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double x, y, z, ap, at, az;
    if (!(ls >> x >> y >> z >> ap >> at >> az))
      throw Error(Errc::config_parse, "bath record malformed at line " + std::to_string(lineno));
    BathNucleus n;
    n.position = Real3(x, y, z);
    n.hyperfine = {kHz2pi(ap), kHz2pi(at), az};
    n.dipole_valid = n.position.norm() >= opt.min_distance_nm;
    s.nuclei.push_back(n);
  }
  s.pair_couplings = coupling_matrix(s.nuclei, opt.nv_axis);
  return s;
}

}  // namespace nvreg
